#include "recon/trainer.hpp"

#include <cmath>
#include <limits>

#include "recon/adam.hpp"
#include "recon/errors.hpp"
#include "recon/io_util.hpp"
#include "recon/parallel.hpp"
#include "recon/rng.hpp"

namespace recon {

namespace {

void accumulate(Gradients<float>& acc, const Gradients<float>& g) {
    if (acc.layers.empty()) {
        acc = g;
        return;
    }
    for (std::size_t i = 0; i < acc.layers.size(); ++i) {
        auto add = [](Tensor<float>& dst, const Tensor<float>& src) {
            float* d = dst.raw();
            const float* s = src.raw();
            for (std::size_t k = 0; k < dst.size(); ++k) d[k] += s[k];
        };
        add(acc.layers[i].weights, g.layers[i].weights);
        add(acc.layers[i].bias, g.layers[i].bias);
    }
}

void scale(Gradients<float>& g, float factor) {
    for (auto& lg : g.layers) {
        for (float& v : lg.weights.data()) v *= factor;
        for (float& v : lg.bias.data()) v *= factor;
    }
}

} // namespace

std::vector<double> evaluate_split(const AutoencoderModel<float>& model,
                                   const DatasetManifest& data, Split split, int threads) {
    const auto indices = data.indices_of(split);
    if (indices.empty())
        throw EmptySplit("evaluate_split: split '" + split_name(split) + "' is empty");
    std::vector<double> out(indices.size());
    parallel_for(indices.size(), threads, [&](std::size_t k) {
        const Sample& s = data.samples[indices[k]];
        out[k] = mse(forward(model, s.values).reconstruction, s.values);
    });
    return out;
}

FitResult fit(AutoencoderModel<float> model, const DatasetManifest& data,
              const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw BadParams("fit: epochs must be >= 1");
    if (cfg.batch_size < 1) throw BadParams("fit: batch_size must be >= 1");
    if (cfg.learning_rate <= 0) throw BadParams("fit: learning_rate must be > 0");

    const auto train_idx = data.indices_of(Split::Train);
    const auto val_idx = data.indices_of(Split::Val);
    if (train_idx.empty()) throw EmptySplit("fit: training split is empty");
    if (val_idx.empty()) throw EmptySplit("fit: validation split is empty");
    if (static_cast<std::size_t>(cfg.batch_size) > train_idx.size())
        throw BadParams("fit: batch_size " + std::to_string(cfg.batch_size) +
                        " exceeds training-set size " + std::to_string(train_idx.size()));
    for (std::size_t i : train_idx)
        if (data.samples[i].values.shape() != model.input_shape)
            throw ShapeMismatch("fit: sample shape " + data.samples[i].values.shape().str() +
                                " != model input " + model.input_shape.str());

    const AdamConfig adam_cfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon};
    AdamState<float> state = AdamState<float>::make_for(model);

    FitResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    AutoencoderModel<float> best = model;
    int epochs_since_best = 0;

    std::vector<std::size_t> order(train_idx);
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng epoch_rng(mix_seed(cfg.seed, 0x65706f63ull + static_cast<std::uint64_t>(epoch)));
        std::copy(train_idx.begin(), train_idx.end(), order.begin());
        epoch_rng.shuffle(order.begin(), order.end());

        double train_loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += B) {
            const std::size_t count = std::min(B, order.size() - start);
            std::vector<Gradients<float>> per_sample(count);
            std::vector<double> per_loss(count);
            parallel_for(count, cfg.threads, [&](std::size_t k) {
                const Sample& s = data.samples[order[start + k]];
                per_sample[k] = backward(model, s.values, s.values, &per_loss[k]);
            });
            Gradients<float> batch_grads;
            for (std::size_t k = 0; k < count; ++k) {
                // Fixed summation order: identical results for any thread count.
                accumulate(batch_grads, per_sample[k]);
                if (!std::isfinite(per_loss[k]))
                    throw NumericFailure("fit: non-finite training loss in epoch " +
                                         std::to_string(epoch));
                train_loss_sum += per_loss[k];
            }
            scale(batch_grads, 1.0f / static_cast<float>(count));
            adam_step(model, batch_grads, state, adam_cfg);
        }

        const auto val_losses = evaluate_split(model, data, Split::Val, cfg.threads);
        double val_sum = 0.0;
        for (double v : val_losses) val_sum += v;
        const double val_mse = val_sum / static_cast<double>(val_losses.size());
        if (!std::isfinite(val_mse))
            throw NumericFailure("fit: non-finite validation loss in epoch " +
                                 std::to_string(epoch));

        result.history.push_back(
            {train_loss_sum / static_cast<double>(order.size()), val_mse});

        if (val_mse < result.best_val_mse) {
            result.best_val_mse = val_mse;
            result.best_epoch = epoch;
            best = model;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        if (cfg.early_stop_patience > 0 && epochs_since_best >= cfg.early_stop_patience) break;
    }

    result.model = std::move(best);
    return result;
}

void write_loss_csv(const std::filesystem::path& path, const LossHistory& history) {
    write_file_atomic(path, [&](std::ostream& os) {
        os << "epoch,train_mse,val_mse\n";
        for (std::size_t i = 0; i < history.size(); ++i)
            os << (i + 1) << ',' << format_g17(history[i].train_mse) << ','
               << format_g17(history[i].val_mse) << "\n";
    });
}

} // namespace recon
