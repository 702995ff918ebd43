#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hwgen/networks.hpp"
#include "hwgen/tensor.hpp"

namespace hwgen::cli {

enum ExitCode { kOk = 0, kUserError = 2, kDataError = 3, kInternalError = 4 };

// Resolved key/value configuration of one command. Every key must exist in
// the preset's defaults.
class RunConfig {
 public:
  static std::map<std::string, std::string> defaults(const std::string& preset);
  explicit RunConfig(const std::string& preset);

  void set(const std::string& key, const std::string& value);
  const std::string& str(const std::string& key) const;
  long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  ModelConfig model() const;

  // key = value lines; values that need it are written as JSON strings.
  void write(const std::filesystem::path& path) const;
  static std::map<std::string, std::string> read(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> values_;
};

// "hwgen-style v1 <dim>" header line, then the values on one line.
void write_style(const std::filesystem::path& path, const Tensor& style);
Tensor read_style(const std::filesystem::path& path);

// Runs one command line (without the program name). Errors are reported on
// `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hwgen::cli
