#pragma once

#include <string>
#include <vector>

namespace dudospect::harness {

// Aggregates completed run directories into comparison tables (with
// paired t-test p-values against the joint_dudo run when present), sweep
// plots, and side-by-side slice image grids. Incomplete runs are listed
// and skipped; the bundle is still produced for the rest. Regeneration
// from the same inputs is byte-identical.
struct ReportSummary {
    std::vector<std::string> included_runs;
    std::vector<std::string> skipped_runs;
};

ReportSummary report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace dudospect::harness
