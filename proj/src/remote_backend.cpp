#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vuldat/embedding.hpp"
#include "vuldat/error.hpp"

namespace vuldat::embed {

using nlohmann::json;

RemoteBackend::RemoteBackend(std::string base_url, RemoteOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  const std::string_view url = base_url_;
  if (url.rfind("https://", 0) == 0) {
    throw ConfigError("https endpoints are not supported: " + base_url_);
  }
  if (url.rfind("http://", 0) != 0) {
    throw ConfigError("embedding endpoint must start with http:// : '" + base_url_ + "'");
  }
  const std::size_t slash = url.find('/', 7);
  if (slash == std::string_view::npos) {
    scheme_host_port_ = base_url_;
  } else {
    scheme_host_port_ = std::string(url.substr(0, slash));
    path_prefix_ = std::string(url.substr(slash));
  }
  if (scheme_host_port_.size() <= 7) throw ConfigError("embedding endpoint has no host");
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  if (options_.batch_size == 0) options_.batch_size = 1;
}

namespace {

bool retryable_status(int status) { return status == 429 || status == 502 || status == 503 || status == 504; }

}  // namespace

std::string RemoteBackend::post(const std::string& path, const std::string& body) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout_s, 0);
  client.set_read_timeout(options_.timeout_s, 0);
  client.set_write_timeout(options_.timeout_s, 0);

  const std::string endpoint = base_url_ + path;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    auto res = client.Post(path_prefix_ + path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status == 200) {
      return res->body;
    } else if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw ProtocolError(endpoint + " answered HTTP " + std::to_string(res->status) + ": " +
                          res->body);
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms * attempt));
    }
  }
  throw TransportError("embedding backend unavailable at " + endpoint + " after " +
                           std::to_string(options_.max_attempts) + " attempt(s): " + last_error,
                       endpoint, options_.max_attempts, true);
}

std::string RemoteBackend::get(const std::string& path) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout_s, 0);
  client.set_read_timeout(options_.timeout_s, 0);

  const std::string endpoint = base_url_ + path;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    auto res = client.Get(path_prefix_ + path);
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status == 200) {
      return res->body;
    } else if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw ProtocolError(endpoint + " answered HTTP " + std::to_string(res->status));
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms * attempt));
    }
  }
  throw TransportError("embedding backend unavailable at " + endpoint + ": " + last_error,
                       endpoint, options_.max_attempts, true);
}

std::vector<std::vector<float>> RemoteBackend::embed_batch(std::span<const text::CleanText> texts,
                                                           const ModelSpec& model) {
  if (texts.empty()) return {};
  json request;
  request["model_name"] = model.model_name;
  json list = json::array();
  for (const auto& t : texts) list.push_back(t.text);
  request["texts"] = std::move(list);

  const std::string body = post("/embed", request.dump());
  json response;
  try {
    response = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("embed response is not JSON: ") + e.what());
  }

  std::vector<std::vector<float>> vectors;
  try {
    if (response.at("model_name").get<std::string>() != model.model_name) {
      throw ProtocolError("embed response names model " +
                          response.at("model_name").get<std::string>() + ", requested " +
                          model.model_name);
    }
    const auto dimension = response.at("dimension").get<std::size_t>();
    if (dimension != model.dimension) {
      throw ProtocolError("backend returned dimension " + std::to_string(dimension) +
                          " for model " + model.model_name + " (expected " +
                          std::to_string(model.dimension) + ")");
    }
    const auto& rows = response.at("vectors");
    if (!rows.is_array() || rows.size() != texts.size()) {
      throw ProtocolError("embed response vector count does not match the request");
    }
    vectors.reserve(rows.size());
    for (const auto& row : rows) {
      auto v = row.get<std::vector<double>>();
      if (v.size() != model.dimension) {
        throw ProtocolError("backend returned a " + std::to_string(v.size()) +
                            "-dimensional vector for model " + model.model_name + " (expected " +
                            std::to_string(model.dimension) + ")");
      }
      std::vector<float> f(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw ProtocolError("backend returned a non-finite value");
        f[i] = static_cast<float>(v[i]);
      }
      vectors.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed embed response: ") + e.what());
  }
  return vectors;
}

std::vector<ModelSpec> RemoteBackend::list_models() {
  const std::string body = get("/models");
  std::vector<ModelSpec> out;
  try {
    const json response = json::parse(body);
    const json& models = response.is_object() ? response.at("models") : response;
    for (const auto& m : models) {
      out.push_back(ModelSpec{m.at("model_name").get<std::string>(),
                              m.at("dimension").get<std::size_t>(),
                              m.value("size_hint_mb", 0)});
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed /models response: ") + e.what());
  }
  return out;
}

}  // namespace vuldat::embed
