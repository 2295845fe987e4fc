#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkg/config.hpp"
#include "dkg/metrics.hpp"
#include "dkg/model.hpp"

namespace dkg {

struct TrainConfig {
  double learning_rate = 6.25e-5;
  std::size_t batch_size = 16;
  std::size_t grad_accum_steps = 2;
  std::size_t max_epochs = 50;
  double max_grad_norm = 1.0;
  std::size_t hops = 5;    // H
  std::size_t hidden = 64; // d
  std::size_t top_k = 8;
  double eps = 1e-12;
  Mode mode = Mode::full;
  double path_loss_weight = 1.0;  // lambda
  std::uint64_t seed = 0;
  std::size_t beam_width = 10;
  std::size_t max_decode_len = 24;
  std::size_t workers = 1;
  std::size_t patience = 0;  // epochs without improvement before stopping; 0 = off

  void validate() const;
  ModelSpec spec() const;
};

/// Keys: learning_rate batch_size grad_accum_steps max_epochs max_grad_norm
/// H d top_k eps mode path_loss_weight seed beam_width max_decode_len
/// workers patience. Unknown keys are rejected.
void apply_config(TrainConfig& cfg, const ConfigMap& map);

/// Adam moments and step count for one parameter buffer.
struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

/// Gradient of the combined loss for one example, flattened in parameter
/// storage order. Throws numeric_error on a non-finite loss.
std::vector<double> example_gradient(const ModelParams& params,
                                     const KnowledgeGraph& kg,
                                     const EntityTokenLayout& layout,
                                     const EncodedExample& ex,
                                     const ModelSpec& spec, double* loss);

/// Scales `grad` in place so its L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

/// Mini-batch optimizer state: accumulates per-example gradients and applies
/// Adam once every grad_accum_steps micro-batches.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const KnowledgeGraph& kg,
          const EntityTokenLayout& layout, ModelParams init);

  /// Forward/backward over one micro-batch; returns its mean loss.
  double train_step(std::span<const EncodedExample> batch);
  /// Applies an update for a partially filled accumulation window.
  void flush();

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  std::size_t updates() const { return adam_.t; }
  /// Norm of the averaged gradient of the last update, before and after
  /// clipping.
  double last_grad_norm() const { return last_norm_; }
  double last_clipped_norm() const { return last_clipped_; }

 private:
  void apply_update();

  TrainConfig cfg_;
  ModelSpec spec_;
  const KnowledgeGraph& kg_;
  const EntityTokenLayout& layout_;
  ModelParams params_;
  AdamState adam_;
  std::vector<double> acc_;
  std::size_t pending_ = 0;
  double last_norm_ = 0.0;
  double last_clipped_ = 0.0;
};

struct EvalInputs {
  std::span<const DialogueExample> raw;
  std::span<const EncodedExample> encoded;
};

struct EvalOutput {
  EvalReport report;
  std::vector<std::string> predictions;  // decoded responses, in input order
};

EvalOutput evaluate(const ModelParams& params, const KnowledgeGraph& kg,
                    const TokenVocab& tokens, const EntityTokenLayout& layout,
                    const EvalInputs& data, const ModelSpec& spec,
                    std::size_t beam_width, std::size_t max_len,
                    std::size_t workers);

/// Validation metric used for model selection: EM in full mode, path@1 in
/// walk-only mode.
double selection_metric(const EvalReport& r, Mode mode);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvalReport valid;
  double metric = 0.0;
};

struct TrainResult {
  ModelParams best;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  std::vector<EpochLog> log;
};

/// Runs up to max_epochs, keeping the parameters with the best validation
/// metric. `on_epoch` sees each log row as it is produced.
TrainResult train_loop(const TrainConfig& cfg, const KnowledgeGraph& kg,
                       const TokenVocab& tokens, const EntityTokenLayout& layout,
                       EvalInputs train, EvalInputs valid, ModelParams init,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

std::string metric_log_header();
std::string metric_log_row(const EpochLog& row);

// ---- checkpoints ------------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  TokenVocab tokens;
  TrainConfig config;
  std::uint64_t entity_hash = 0;
  std::uint64_t relation_hash = 0;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;
};

/// Writes manifest.json, params.bin (little-endian float64 in block order)
/// and tokens.txt into `dir`, creating it if needed.
void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
/// Throws on missing files, blob length mismatch, or token hash mismatch.
Checkpoint load_checkpoint(const std::string& dir);
/// Refuses a KG whose vocabularies differ from the checkpoint's.
void check_compatible(const Checkpoint& ckpt, const KnowledgeGraph& kg);

std::string hash_hex(std::uint64_t h);

}  // namespace dkg
