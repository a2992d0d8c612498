#pragma once

#include <string>
#include <string_view>

namespace vuldat::text {

/// Classic Porter suffix-stripping stemmer (the reference C variant, including
/// its bli->ble and logi->log departures). Expects a lowercase [a-z]+ word;
/// words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace vuldat::text
