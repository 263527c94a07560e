#include "ssrc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ssrc/adam.hpp"
#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"
#include "ssrc/stats.hpp"

namespace ssrc {

std::vector<double> predict_scores(const Model& model, const PatchSet& patches, std::size_t batch) {
  require(batch >= 1, ErrorCode::kInvalidArgument, "batch size must be positive");
  std::vector<double> scores;
  scores.reserve(patches.count());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < patches.count(); start += batch) {
    idx.resize(std::min(batch, patches.count() - start));
    std::iota(idx.begin(), idx.end(), start);
    Graph graph;
    const auto params = model.bind(graph, false);
    Var probs = ops::softmax(model.forward(graph, params, graph.constant(patches.batch(idx))), 1);
    for (std::size_t b = 0; b < idx.size(); ++b) scores.push_back(probs.value().at({b, 1}));
  }
  return scores;
}

TrainResult train_model(const ModelConfig& config, const PatchSet& train, const PatchSet& validation,
                        const TrainOptions& o, const EpochCallback& on_epoch) {
  require(o.batch >= 1 && o.epochs >= 1, ErrorCode::kInvalidConfig, "batch and epochs must be positive");
  require(train.count() > 0, ErrorCode::kEmptyInput, "empty training set");
  Model model = Model::build(config);
  std::array<std::size_t, 2> counts{0, 0};
  for (Label y : train.labels) ++counts[static_cast<std::size_t>(y)];
  nn::class_weights(counts);  // rejects a single-class training split up front

  std::vector<Tensor> weights;
  for (const auto& p : model.parameters()) weights.push_back(p.value);
  AdamState adam(weights, AdamOptions{.lr = o.lr});

  TrainResult result{model, {}, 0, -1.0};
  std::vector<std::size_t> order(train.count());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tensor> grads(weights.size());
  std::vector<int> labels;

  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    Rng shuffle(derive_seed(o.seed, epoch));
    shuffle.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += o.batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(o.batch, order.size() - start));
      labels.clear();
      for (std::size_t k : idx) labels.push_back(train.labels[k]);
      Graph graph;
      std::vector<Var> params;
      params.reserve(weights.size());
      for (const Tensor& w : weights) params.push_back(graph.parameter(w));
      Var logits = model.forward(graph, params, graph.constant(train.batch(idx)));
      Var loss = nn::weighted_cross_entropy(logits, labels, counts);
      const Gradients g = graph.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        grads[i] = g.has(params[i]) ? g.of(params[i]) : Tensor(weights[i].shape(), 0.0);
      }
      adam_step(weights, grads, adam);
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
    }

    for (std::size_t i = 0; i < weights.size(); ++i) model.parameters()[i].value = weights[i];
    const std::vector<double> scores = predict_scores(model, validation);
    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()), roc_auc(validation.labels, scores)};
    result.log.push_back(entry);
    if (entry.validation_auc > result.best_validation_auc) {
      result.best_validation_auc = entry.validation_auc;
      result.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

GridResult grid_search(const ModelConfig& base, const PatchSet& train, const PatchSet& validation,
                       const TrainOptions& options, std::span<const double> lrs,
                       std::span<const std::size_t> hiddens, const EpochCallback& on_epoch) {
  const std::vector<double> lr_list = lrs.empty() ? std::vector<double>{options.lr}
                                                  : std::vector<double>(lrs.begin(), lrs.end());
  const std::vector<std::size_t> hidden_list =
      hiddens.empty() ? std::vector<std::size_t>{base.hidden}
                      : std::vector<std::size_t>(hiddens.begin(), hiddens.end());
  std::optional<GridResult> best;
  std::vector<GridPoint> points;
  for (double lr : lr_list) {
    for (std::size_t hidden : hidden_list) {
      ModelConfig config = base;
      config.hidden = hidden;
      TrainOptions o = options;
      o.lr = lr;
      TrainResult r = train_model(config, train, validation, o, on_epoch);
      points.push_back({lr, hidden, r.best_validation_auc, r.best_epoch});
      if (!best || r.best_validation_auc > best->best.best_validation_auc) {
        best = GridResult{std::move(r), o, {}};
      }
    }
  }
  best->points = std::move(points);
  return std::move(*best);
}

std::string training_log_tsv(std::span<const EpochLog> log) {
  std::string out = "epoch\ttrain_loss\tvalidation_auc\n";
  char line[96];
  for (const EpochLog& e : log) {
    std::snprintf(line, sizeof line, "%zu\t%.10f\t%.10f\n", e.epoch, e.train_loss, e.validation_auc);
    out += line;
  }
  return out;
}

}  // namespace ssrc
