#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "avtrack/tracker.hpp"

namespace avtrack {

/** CSV emitters.  Every table opens with a `# scenario <hash>` line followed
 * by a column header carrying units; all numbers print in shortest
 * round-trip form, so identical runs emit byte-identical files. */
std::string csv_fronts(const RunHistory& h);
std::string csv_trajectory(const RunHistory& h);
std::string csv_ledger(const RunHistory& h);
std::string csv_snapshots(const RunHistory& h, const std::vector<double>& times);

/** Self-contained x-t diagram: front lifetimes colored by kind, vehicle
 * path overlaid. */
std::string svg_diagram(const RunHistory& h);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace avtrack
