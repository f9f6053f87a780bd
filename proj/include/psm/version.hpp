#pragma once

namespace psm {

inline constexpr const char* kVersion = "0.1.0";

// Schema tags stamped into output manifests; readers reject files whose
// layout does not match the tag they expect.
inline constexpr const char* kScoresSchema = "psm.scores/1";
inline constexpr const char* kSelectionSchema = "psm.selection/1";
inline constexpr const char* kCascadeSchema = "psm.cascades/1";
inline constexpr const char* kLabelsSchema = "psm.labels/1";
inline constexpr const char* kReportSchema = "psm.report/1";

}  // namespace psm
