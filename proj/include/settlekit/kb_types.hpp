#pragma once

// Value types shared by the knowledge and synthesis modules.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace settlekit::kb {

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

enum class VerdictStatus { Supported, Contradicted, Unknown };

std::string_view to_string(VerdictStatus s);
VerdictStatus parse_verdict_status(std::string_view s);

struct Verdict {
  Triple claim;
  VerdictStatus status = VerdictStatus::Unknown;
  std::optional<Triple> witness;

  bool operator==(const Verdict&) const = default;
};

/// A sentence-aligned slice of a standards document.
struct KbChunk {
  std::string id;
  std::string source_doc;
  std::string text;
  std::map<std::string, std::uint32_t> term_counts;

  bool operator==(const KbChunk&) const = default;
};

}  // namespace settlekit::kb
