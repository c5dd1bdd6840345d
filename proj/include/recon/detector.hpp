#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "recon/dataset.hpp"
#include "recon/model.hpp"

namespace recon {

/// One scored sample. `mse` lives in the active data scale; `percentile_rank`
/// of tied scores is the rank of the last tied element divided by the record
/// count, so a perfect tie across the board gives rank 1 everywhere.
struct ScoreRecord {
    std::int64_t sample_index = 0; // index into the manifest
    std::int32_t sim_id = 0;
    std::int32_t t_start = 0;
    std::int32_t t_end = 0;
    double mse = 0.0;
    bool flagged = false;
    double percentile_rank = 0.0;
};

struct AnomalyReport {
    double threshold = 0.0;
    std::vector<ScoreRecord> flagged; // descending mse, ties by (sim_id, t_start)
    std::map<std::int32_t, std::int64_t> per_simulation;
    std::map<std::int32_t, std::int64_t> per_time_bucket; // bucket = t_start / bucket_width
    std::int32_t bucket_width = 10;
};

struct AttributionRow {
    std::int32_t sim_id = 0;
    std::int64_t sample_index = 0;
    std::int32_t t_start = 0;
    std::int32_t t_end = 0;
    double mse = 0.0;
};

/// Reconstruction MSE for every sample of the chosen split, in manifest
/// order, with provenance copied from the manifest.
std::vector<ScoreRecord> score(const AutoencoderModel<float>& model,
                               const DatasetManifest& data, Split split, int threads = 1);

/// Marks records with mse strictly greater than the threshold and builds the
/// report. Mutates the records' flagged field to keep them consistent.
AnomalyReport flag(std::vector<ScoreRecord>& records, double threshold,
                   std::int32_t bucket_width = 10);

/// Flagged records grouped by simulation (rows sorted by sim_id, then
/// t_start); a stacked volume keeps its full time window in one row.
std::vector<AttributionRow> attribute(const AnomalyReport& report,
                                      const DatasetManifest& data);

/// Writes scores.csv (all records), report.json (threshold, flagged list,
/// summaries, attribution) and per-flagged-sample original/reconstruction
/// PGM slices into `out_dir`.
void emit_report(const std::vector<ScoreRecord>& records, const AnomalyReport& report,
                 const AutoencoderModel<float>& model, const DatasetManifest& data,
                 const std::filesystem::path& out_dir, bool dump_images = true);

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoreRecord>& records);

} // namespace recon
