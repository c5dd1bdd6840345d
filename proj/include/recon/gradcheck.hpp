#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "recon/model.hpp"

namespace recon {

struct GradCheckEntry {
    std::string parameter;  // record name, e.g. "layer3.weight"
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Compares analytic gradients with central finite differences for every
/// parameter element. Meant for 64-bit models small enough to perturb every
/// parameter.
///
/// The relative-error denominator is max(|analytic|, |numeric|, floor) with
/// floor = 1e-4 * max(1, |loss|). Central differences carry round-off noise
/// of order eps_machine * |loss| / epsilon, so for parameters whose true
/// gradient sits below that resolution a bare ratio would only measure noise;
/// the loss-scaled floor keeps the metric meaningful while still flagging
/// wrong-sign/missing-term bugs, whose error is of the magnitude of typical
/// gradients and far above the floor.
inline GradCheckReport gradient_check(AutoencoderModel<double> model, const Tensor<double>& x,
                                      const Tensor<double>& target, double epsilon = 1e-5,
                                      double tolerance = 1e-4) {
    GradCheckReport report;
    report.tolerance = tolerance;

    double loss0 = 0.0;
    const Gradients<double> analytic = backward(model, x, target, &loss0);
    const double floor = 1e-4 * std::max(1.0, std::abs(loss0));

    for_each_parameter(model, [&](std::size_t layer_idx, const std::string& name,
                                  Tensor<double>& p) {
        const auto& lg = analytic.layers[layer_idx];
        const Tensor<double>& g = name.ends_with(".weight") ? lg.weights : lg.bias;
        GradCheckEntry entry;
        entry.parameter = name;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + epsilon;
            const double loss_plus = mse(forward(model, x).reconstruction, target);
            p[i] = saved - epsilon;
            const double loss_minus = mse(forward(model, x).reconstruction, target);
            p[i] = saved;
            const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            const double a = g[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / denom);
        }
        report.entries.push_back(entry);
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    });

    report.pass = report.max_rel_error <= tolerance;
    return report;
}

} // namespace recon
