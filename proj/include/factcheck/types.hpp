#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factcheck {

enum class VerdictLabel { Supported, Refuted, NotEnoughInfo };

/// Canonical spelling used in traces and reports: "supported", "refuted", "not_enough_info".
std::string_view to_string(VerdictLabel label) noexcept;
/// Inverse of to_string; throws ParseError on anything else.
VerdictLabel verdict_from_string(std::string_view s);

inline constexpr VerdictLabel kAllVerdicts[] = {
    VerdictLabel::Supported, VerdictLabel::Refuted, VerdictLabel::NotEnoughInfo};

enum class DatasetKind { FM2, WICE, CUSTOM };

std::string_view to_string(DatasetKind kind) noexcept;
DatasetKind dataset_kind_from_string(std::string_view s);

struct Passage {
    std::string id;
    std::string page_title;
    std::size_t seq = 0;
    std::string text;

    bool operator==(const Passage&) const = default;
};

struct GoldEvidenceRef {
    std::string page_title;
    std::optional<std::string> sentence;
    std::optional<std::string> passage_id;

    bool operator==(const GoldEvidenceRef&) const = default;
};

struct ClaimRecord {
    std::string claim_id;
    std::string claim;
    VerdictLabel gold_label = VerdictLabel::NotEnoughInfo;
    /// Label string exactly as it appeared in the dataset file.
    std::string source_label;
    std::vector<GoldEvidenceRef> gold_evidence;
    DatasetKind dataset = DatasetKind::CUSTOM;
};

}  // namespace factcheck
