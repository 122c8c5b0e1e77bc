#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "corpstat/campaign.hpp"

namespace corpstat {

// Both renderings cover the whole results history plus the provenance
// needed to rerun it (seeds, priors, tallies). Throw kState when the
// campaign has no finalized result.
std::string render_text_report(const Campaign& campaign);
nlohmann::json render_json_report(const Campaign& campaign);

}  // namespace corpstat
