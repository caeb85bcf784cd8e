#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rtip/errors.hpp"
#include "rtip/model.hpp"

namespace rtip {

/// Configuration problems the caller can fix: unreadable file, malformed
/// line, unknown key, unparsable value.  The front end maps these to its
/// usage exit code.
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem failures while persisting artifacts.
struct IoError : Error {
  using Error::Error;
};

/// Flat `key = value` configuration.  '#' starts a comment, blank lines are
/// skipped, a later assignment overrides an earlier one.  Insertion order is
/// preserved so serialization (and the manifests built from it) is
/// deterministic.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::filesystem::path& path);
  static KvConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  const std::string& at(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  /// Comma-separated list of numbers; empty if the key is absent.
  std::vector<double> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);  // round-trip precision
  void set(const std::string& key, int value);
  void set_list(const std::string& key, const std::vector<double>& values);

  /// Overlays the model-parameter keys (beta, lambda_r, L, a, r, Z, tol_bvp,
  /// tol_ode, tol_newton) onto p, then validates.
  void apply_model(ModelParams& p) const;

  /// Throws ConfigError naming the first key that is neither a model
  /// parameter nor in `extra`.
  void expect_known(const std::vector<std::string>& extra) const;

  std::string serialize() const;
  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> items_;
};

/// Strict full-string double parse; `what` names the value in the error.
double parse_double(const std::string& text, const std::string& what);

/// Writes content through a same-directory temporary and renames it into
/// place, so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// CSV with a header row; numbers rendered in full-precision scientific
/// notation so parsing them back reproduces the doubles bit-for-bit.
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Run manifest written alongside artifacts: subcommand, the full effective
/// configuration, and the artifact list.  Rerunning from it reproduces every
/// numeric output bit-for-bit.
struct Manifest {
  std::string subcommand;
  KvConfig config;
  std::vector<std::string> outputs;
};

void write_manifest(const std::filesystem::path& dir,
                    const std::string& subcommand, const KvConfig& config,
                    const std::vector<std::string>& outputs);
Manifest read_manifest(const std::filesystem::path& file);

}  // namespace rtip
