#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cascadecay {

enum class Severity { info, warning, error };

std::string_view severity_name(Severity s);

// One structured diagnostic. `line` is 1-based when the record refers to an
// input stream position, 0 otherwise.
struct DiagnosticRecord {
  Severity severity = Severity::info;
  std::string code;
  std::uint64_t line = 0;
  std::string detail;
};

// Collects counted warnings/errors from ingestion and fitting. Per code the
// full count is kept but only the first few records are stored verbatim.
class Diagnostics {
 public:
  static constexpr std::size_t kMaxRecordsPerCode = 25;

  void report(Severity severity, std::string code, std::string detail = {},
              std::uint64_t line = 0);

  std::uint64_t count(std::string_view code) const;
  std::uint64_t error_count() const { return errors_; }
  std::uint64_t warning_count() const { return warnings_; }
  const std::vector<DiagnosticRecord>& records() const { return records_; }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }

  // Tab-separated records followed by per-code summary lines.
  void write(std::ostream& os) const;

 private:
  std::vector<DiagnosticRecord> records_;
  std::map<std::string, std::uint64_t> counts_;
  std::uint64_t errors_ = 0;
  std::uint64_t warnings_ = 0;
};

}  // namespace cascadecay
