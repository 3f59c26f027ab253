#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace pcm {

inline constexpr int kReportSchemaVersion = 1;

/// Flat INI-style campaign configuration ("[section]" headers, "key = value"
/// lines). Keys are addressed as "section.key". Every lookup is recorded
/// with its resolved value (default or explicit) so the report can echo the
/// full parameter set.
class CampaignConfig {
 public:
  static CampaignConfig parse(const std::string& text);
  static CampaignConfig load(const std::filesystem::path& path);

  bool empty() const { return values_.empty(); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& raw() const { return values_; }

  /// Rejects keys outside `allowed`, naming the first offender.
  void check_keys(const std::string& subcommand, const std::set<std::string>& allowed) const;

  int get_int(const std::string& key, int fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback);
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback);

  const nlohmann::ordered_json& echo() const { return echo_; }

 private:
  std::map<std::string, std::string> values_;
  nlohmann::ordered_json echo_ = nlohmann::ordered_json::object();
};

/// RFC-4180 CSV with '.' decimals and 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    Row& add(double v);
    Row& add(long long v);
    Row& add(int v) { return add(static_cast<long long>(v)); }
    Row& add(std::size_t v) { return add(static_cast<long long>(v)); }
    Row& add(const std::string& v);
    Row& add(const char* v) { return add(std::string(v)); }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  Row& row();
  std::size_t size() const { return rows_.size(); }
  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

std::string csv_escape(const std::string& cell);
std::string format_number(double v);

struct RunRequest {
  std::string subcommand;
  std::filesystem::path config_path;
  std::filesystem::path out_dir = ".";
  std::optional<unsigned> workers;
};

const std::vector<std::string>& subcommand_names();

/// Allowed "section.key" names for a subcommand.
std::set<std::string> allowed_keys(const std::string& subcommand);

/// Runs one campaign and writes <out>/<subcommand>.csv (plus extra tables
/// for some subcommands) and <out>/<subcommand>.json. Returns the exit
/// code: 0 success, 1 validation error, 2 numerical failure. Diagnostics go
/// to `err`, a short table to `out`.
int run_campaign(const RunRequest& request, std::ostream& out, std::ostream& err);

/// Same, with an already parsed configuration.
int run_campaign(const std::string& subcommand, CampaignConfig config,
                 const std::filesystem::path& out_dir, std::optional<unsigned> workers,
                 std::ostream& out, std::ostream& err);

/// v[i+1] - v[i] <= e[i] + e[i+1] for every step, and v.back() < v.front().
bool decreasing_within_errors(const std::vector<double>& v, const std::vector<double>& e);

}  // namespace pcm
