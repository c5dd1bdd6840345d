#include "recon/detector.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "recon/errors.hpp"
#include "recon/io_util.hpp"
#include "recon/parallel.hpp"
#include "recon/pgm.hpp"

namespace recon {

std::vector<ScoreRecord> score(const AutoencoderModel<float>& model,
                               const DatasetManifest& data, Split split, int threads) {
    const auto indices = data.indices_of(split);
    if (indices.empty())
        throw EmptySplit("score: split '" + split_name(split) + "' is empty");

    std::vector<ScoreRecord> records(indices.size());
    parallel_for(indices.size(), threads, [&](std::size_t k) {
        const Sample& s = data.samples[indices[k]];
        ScoreRecord r;
        r.sample_index = static_cast<std::int64_t>(indices[k]);
        r.sim_id = s.sim_id;
        r.t_start = s.t_start;
        r.t_end = s.t_end;
        r.mse = mse(forward(model, s.values).reconstruction, s.values);
        records[k] = r;
    });

    // Percentile rank: fraction of records with mse <= this record's mse
    // (ties share the rank of the last tied element).
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records[a].mse < records[b].mse; });
    const double n = static_cast<double>(records.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && records[order[j + 1]].mse == records[order[i]].mse) ++j;
        const double rank = static_cast<double>(j + 1) / n;
        for (std::size_t k = i; k <= j; ++k) records[order[k]].percentile_rank = rank;
        i = j + 1;
    }
    return records;
}

AnomalyReport flag(std::vector<ScoreRecord>& records, double threshold,
                   std::int32_t bucket_width) {
    if (!(threshold > 0)) throw BadParams("flag: threshold must be > 0");
    if (bucket_width < 1) throw BadParams("flag: bucket_width must be >= 1");
    AnomalyReport report;
    report.threshold = threshold;
    report.bucket_width = bucket_width;
    for (auto& r : records) {
        r.flagged = r.mse > threshold; // strictly greater
        if (r.flagged) {
            report.flagged.push_back(r);
            ++report.per_simulation[r.sim_id];
            ++report.per_time_bucket[r.t_start / bucket_width];
        }
    }
    std::sort(report.flagged.begin(), report.flagged.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) {
                  if (a.mse != b.mse) return a.mse > b.mse;
                  if (a.sim_id != b.sim_id) return a.sim_id < b.sim_id;
                  return a.t_start < b.t_start;
              });
    return report;
}

std::vector<AttributionRow> attribute(const AnomalyReport& report,
                                      const DatasetManifest& data) {
    std::vector<AttributionRow> rows;
    for (const auto& r : report.flagged) {
        if (r.sample_index < 0 ||
            r.sample_index >= static_cast<std::int64_t>(data.samples.size()))
            throw UnknownSample("attribute: record references sample " +
                                std::to_string(r.sample_index) + " outside the manifest");
        const Sample& s = data.samples[static_cast<std::size_t>(r.sample_index)];
        if (s.sim_id != r.sim_id || s.t_start != r.t_start || s.t_end != r.t_end)
            throw UnknownSample("attribute: record provenance does not match manifest sample " +
                                std::to_string(r.sample_index));
        rows.push_back({r.sim_id, r.sample_index, r.t_start, r.t_end, r.mse});
    }
    std::sort(rows.begin(), rows.end(), [](const AttributionRow& a, const AttributionRow& b) {
        if (a.sim_id != b.sim_id) return a.sim_id < b.sim_id;
        if (a.t_start != b.t_start) return a.t_start < b.t_start;
        return a.sample_index < b.sample_index;
    });
    return rows;
}

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoreRecord>& records) {
    write_file_atomic(path, [&](std::ostream& os) {
        os << "sample_index,sim_id,t_start,t_end,mse,flagged\n";
        for (const auto& r : records)
            os << r.sample_index << ',' << r.sim_id << ',' << r.t_start << ',' << r.t_end << ','
               << format_g17(r.mse) << ',' << (r.flagged ? 1 : 0) << "\n";
    });
}

void emit_report(const std::vector<ScoreRecord>& records, const AnomalyReport& report,
                 const AutoencoderModel<float>& model, const DatasetManifest& data,
                 const std::filesystem::path& out_dir, bool dump_images) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());

    write_scores_csv(out_dir / "scores.csv", records);

    nlohmann::ordered_json j;
    j["threshold"] = report.threshold;
    j["bucket_width"] = report.bucket_width;
    j["record_count"] = records.size();
    j["flagged"] = nlohmann::ordered_json::array();
    for (const auto& r : report.flagged)
        j["flagged"].push_back({{"sample_index", r.sample_index},
                                {"sim_id", r.sim_id},
                                {"t_start", r.t_start},
                                {"t_end", r.t_end},
                                {"mse", r.mse},
                                {"percentile_rank", r.percentile_rank}});
    auto& per_sim = j["summary"]["per_simulation"] = nlohmann::ordered_json::object();
    for (const auto& [sim, count] : report.per_simulation)
        per_sim[std::to_string(sim)] = count;
    auto& per_bucket = j["summary"]["per_time_bucket"] = nlohmann::ordered_json::object();
    for (const auto& [bucket, count] : report.per_time_bucket)
        per_bucket[std::to_string(bucket)] = count;
    j["attribution"] = nlohmann::ordered_json::array();
    for (const auto& row : attribute(report, data))
        j["attribution"].push_back({{"sim_id", row.sim_id},
                                    {"sample_index", row.sample_index},
                                    {"t_start", row.t_start},
                                    {"t_end", row.t_end},
                                    {"mse", row.mse}});
    write_file_atomic(out_dir / "report.json",
                      [&](std::ostream& os) { os << j.dump(2) << "\n"; });

    if (!dump_images) return;
    const double hi = scale_hi(data.norm);
    for (const auto& r : report.flagged) {
        const Sample& s = data.samples[static_cast<std::size_t>(r.sample_index)];
        const Tensor<float> recon = forward(model, s.values).reconstruction;
        const bool is_volume = s.values.shape().rank() == 3;
        const std::int64_t slice = is_volume ? s.values.shape().extent(0) / 2 : 0;
        const auto name = [&](const char* kind) {
            return "sample" + std::to_string(r.sample_index) + "_" + kind + "_d" +
                   std::to_string(slice) + ".pgm";
        };
        write_pgm(out_dir / name("orig"), is_volume ? central_slice(s.values) : s.values, 0.0,
                  hi);
        write_pgm(out_dir / name("recon"), is_volume ? central_slice(recon) : recon, 0.0, hi);
    }
}

} // namespace recon
