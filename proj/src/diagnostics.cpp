#include "cascadecay/diagnostics.hpp"

namespace cascadecay {

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::error: return "error";
  }
  return "unknown";
}

void Diagnostics::report(Severity severity, std::string code, std::string detail,
                         std::uint64_t line) {
  if (severity == Severity::error) ++errors_;
  if (severity == Severity::warning) ++warnings_;
  auto& n = counts_[code];
  ++n;
  if (n <= kMaxRecordsPerCode) {
    records_.push_back({severity, std::move(code), line, std::move(detail)});
  }
}

std::uint64_t Diagnostics::count(std::string_view code) const {
  const auto it = counts_.find(std::string(code));
  return it == counts_.end() ? 0 : it->second;
}

void Diagnostics::write(std::ostream& os) const {
  for (const auto& r : records_) {
    os << severity_name(r.severity) << '\t' << r.code;
    if (r.line != 0) os << "\tline=" << r.line;
    if (!r.detail.empty()) os << '\t' << r.detail;
    os << '\n';
  }
  for (const auto& [code, n] : counts_) {
    os << "summary\t" << code << "\tcount=" << n << '\n';
  }
}

}  // namespace cascadecay
