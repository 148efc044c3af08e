#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gripsim {

/// Provenance record written next to every command's outputs. It is written
/// with status "running" before any result file and rewritten when the
/// command finishes.
class RunManifest {
 public:
  RunManifest(std::string path, std::string command, std::vector<std::string> argv);

  /// Hashes the file's bytes into the config hash and lists it as an input.
  void add_input_file(const std::string& path);
  /// Hashes literal text (resolved flags) into the config hash.
  void add_input_text(const std::string& name, const std::string& text);
  void add_seed(const std::string& name, std::uint64_t seed);
  void add_output(const std::string& path);

  /// Hex SHA-256 over every input byte added so far, in insertion order.
  std::string config_hash() const;

  void write_started();
  void write_finished(bool ok, const std::string& message = {});

 private:
  void write(const std::string& status, const std::string& message) const;

  std::string path_;
  std::string command_;
  std::vector<std::string> argv_;
  std::vector<std::pair<std::string, std::string>> inputs_;  // name, content
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
  std::vector<std::string> outputs_;
  std::chrono::system_clock::time_point started_;
  double elapsed_ = 0;
  std::chrono::steady_clock::time_point clock_;
};

std::string sha256_hex(const std::string& bytes);
std::string code_version();

}  // namespace gripsim
