#include "gripsim/io/manifest.hpp"

#include <ctime>
#include <fstream>

#include <openssl/evp.h>

#include "gripsim/errors.hpp"
#include "gripsim/io/config_files.hpp"
#include "json.hpp"

#ifndef GRIPSIM_VERSION
#define GRIPSIM_VERSION "unknown"
#endif

namespace gripsim {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string code_version() { return GRIPSIM_VERSION; }

namespace {
std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

RunManifest::RunManifest(std::string path, std::string command, std::vector<std::string> argv)
    : path_(std::move(path)),
      command_(std::move(command)),
      argv_(std::move(argv)),
      started_(std::chrono::system_clock::now()),
      clock_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input_file(const std::string& path) { inputs_.emplace_back(path, read_text_file(path)); }

void RunManifest::add_input_text(const std::string& name, const std::string& text) { inputs_.emplace_back(name, text); }

void RunManifest::add_seed(const std::string& name, std::uint64_t seed) { seeds_.emplace_back(name, seed); }

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

std::string RunManifest::config_hash() const {
  // Length-prefixed so that moving bytes between inputs changes the hash.
  std::string all = command_;
  all += '\0';
  for (const auto& [name, content] : inputs_) {
    all += std::to_string(content.size());
    all += ':';
    all += content;
  }
  return sha256_hex(all);
}

void RunManifest::write_started() { write("running", {}); }

void RunManifest::write_finished(bool ok, const std::string& message) {
  elapsed_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
  write(ok ? "complete" : "failed", message);
}

void RunManifest::write(const std::string& status, const std::string& message) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config_hash"] = config_hash();
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& [name, content] : inputs_)
    inputs.push_back({{"name", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  j["inputs"] = inputs;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (const auto& [name, seed] : seeds_) seeds[name] = seed;
  j["seeds"] = seeds;
  j["code_version"] = code_version();
  j["outputs"] = outputs_;
  j["started"] = iso_time(started_);
  j["wall_clock_s"] = elapsed_;
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  std::ofstream os(path_);
  if (!os) throw InputError("cannot write " + path_);
  os << j.dump(2) << '\n';
  if (!os) throw InputError("failed writing " + path_);
}

}  // namespace gripsim
