#include "factcheck/types.hpp"

#include "factcheck/error.hpp"

namespace factcheck {

std::string_view to_string(VerdictLabel label) noexcept {
    switch (label) {
        case VerdictLabel::Supported: return "supported";
        case VerdictLabel::Refuted: return "refuted";
        case VerdictLabel::NotEnoughInfo: return "not_enough_info";
    }
    return "not_enough_info";
}

VerdictLabel verdict_from_string(std::string_view s) {
    if (s == "supported") return VerdictLabel::Supported;
    if (s == "refuted") return VerdictLabel::Refuted;
    if (s == "not_enough_info") return VerdictLabel::NotEnoughInfo;
    throw ParseError("unknown verdict label '" + std::string(s) +
                     "' (expected supported, refuted or not_enough_info)");
}

std::string_view to_string(DatasetKind kind) noexcept {
    switch (kind) {
        case DatasetKind::FM2: return "fm2";
        case DatasetKind::WICE: return "wice";
        case DatasetKind::CUSTOM: return "custom";
    }
    return "custom";
}

DatasetKind dataset_kind_from_string(std::string_view s) {
    if (s == "fm2" || s == "FM2") return DatasetKind::FM2;
    if (s == "wice" || s == "WICE" || s == "WiCE") return DatasetKind::WICE;
    if (s == "custom" || s == "CUSTOM") return DatasetKind::CUSTOM;
    throw ParseError("unknown dataset kind '" + std::string(s) + "' (expected fm2, wice or custom)");
}

}  // namespace factcheck
