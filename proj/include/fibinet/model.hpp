#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fibinet/data.hpp"
#include "fibinet/numeric.hpp"

namespace fibinet::model {

using numeric::DenseMatrix;
using numeric::DenseVector;

/// Which bilinear matrix a pair (i, j) reads.
enum class FieldType {
  kAll,          ///< one k×k matrix shared by every pair
  kEach,         ///< one matrix per left field i
  kInteraction,  ///< one matrix per pair (i, j)
};

enum class Mode { kShallow, kDeep };

enum class Ablation {
  kNone,
  kNoSe,  ///< SENET path removed: only the original-embedding interactions remain
  kNoBi,  ///< every interaction is a plain Hadamard product
  kFm,    ///< shallow, no SENET, no bilinear: a factorization machine
  kFnn,   ///< raw concatenated embeddings feed the DNN
  kLr,    ///< bias plus linear part only
};

/// Two interaction-method digits: the first applies to the original
/// embeddings, the second to the reweighted ones. true means bilinear.
struct CombinationCode {
  bool original_bilinear = true;
  bool reweighted_bilinear = true;

  static CombinationCode parse(std::string_view code);
  std::string to_string() const;
  bool operator==(const CombinationCode&) const = default;
};

std::string_view to_string(FieldType t);
std::string_view to_string(Mode m);
std::string_view to_string(Ablation a);
FieldType parse_field_type(std::string_view s);
Mode parse_mode(std::string_view s);
Ablation parse_ablation(std::string_view s);

struct ModelConfig {
  std::size_t num_fields = 2;
  std::size_t embedding_dim = 10;
  std::size_t reduction_ratio = 3;
  FieldType field_type = FieldType::kInteraction;
  CombinationCode combination{};
  Mode mode = Mode::kDeep;
  std::vector<std::size_t> hidden_units{400, 400, 400};
  double dropout = 0.5;
  Ablation ablation = Ablation::kNone;
  /// p-path and q-path read the same bilinear matrices.
  bool share_bilinear = false;
  bool use_linear = true;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::size_t num_pairs() const noexcept { return num_fields * (num_fields - 1) / 2; }
  std::size_t senet_hidden() const noexcept;
  std::size_t bilinear_matrices_per_path() const noexcept;

  bool operator==(const ModelConfig&) const = default;
};

/// The forward graph a config resolves to once its ablation is applied.
struct Architecture {
  bool linear = true;            ///< bias and per-bucket linear weights
  bool interactions = true;      ///< false for FNN and LR
  bool reweighted_path = true;   ///< SENET + q-path present
  bool original_bilinear = true;
  bool reweighted_bilinear = true;
  bool deep = true;
  bool raw_embedding_input = false;  ///< FNN: DNN reads [e₁,…,e_f]
  bool uses_embeddings = true;

  /// Width of the combined vector c (or of the raw embedding concat for FNN).
  std::size_t combined_width = 0;

  static Architecture resolve(const ModelConfig& config);
};

/// Every learnable array. Linear weights are bucket_count × 1 per field.
/// SENET matrices are stored in matvec orientation: senet_w1 is
/// hidden × f and senet_w2 is f × hidden.
struct ModelParams {
  std::vector<DenseMatrix> embeddings;
  std::vector<DenseMatrix> linear;
  DenseMatrix bias = DenseMatrix(1, 1);
  DenseMatrix senet_w1;
  DenseMatrix senet_w2;
  std::vector<DenseMatrix> bilinear_p;
  std::vector<DenseMatrix> bilinear_q;  ///< empty when share_bilinear
  std::vector<DenseMatrix> dnn_weights;
  std::vector<DenseMatrix> dnn_biases;  ///< width × 1
  DenseMatrix head_weight;              ///< 1 × last width
  DenseMatrix head_bias = DenseMatrix(1, 1);

  /// Xavier-uniform matrices, zero biases and linear weights, uniform(±0.1)
  /// embeddings. Bilinear and SENET parameters are allocated even when the
  /// combination code or ablation leaves them unused; the DNN exists only
  /// for deep architectures.
  static ModelParams initialize(const ModelConfig& config, const data::FieldSchema& schema,
                                numeric::Rng& rng);

  ModelParams zeros_like() const;

  /// Visits (name, array) for every non-empty block in a stable order.
  void for_each_block(const std::function<void(const std::string&, DenseMatrix&)>& fn);
  void for_each_block(const std::function<void(const std::string&, const DenseMatrix&)>& fn) const;

  DenseMatrix* find_block(std::string_view name);
  std::size_t total_size() const;
  std::size_t bilinear_parameter_count(bool reweighted_path) const;

  bool operator==(const ModelParams&) const = default;
};

/// Gradients for one backward pass, shaped like the parameters.
class GradientTape {
 public:
  explicit GradientTape(const ModelParams& like) : grads_(like.zeros_like()) {}

  ModelParams& grads() noexcept { return grads_; }
  const ModelParams& grads() const noexcept { return grads_; }

 private:
  ModelParams grads_;
};

// Single-row layer operations. Embeddings are passed as f × k matrices.
namespace layers {

/// eᵢ = valueᵢ · embeddings[i].row(indexᵢ) for one batch row.
DenseMatrix embed(const data::ExampleBatch& batch, std::size_t row, const ModelParams& params);
/// zᵢ = mean of eᵢ.
DenseVector squeeze(const DenseMatrix& e);
/// A = relu(W₂ · relu(W₁ · Z)).
DenseVector excitation(const DenseVector& z, const DenseMatrix& w1, const DenseMatrix& w2);
/// vᵢ = aᵢ · eᵢ.
DenseMatrix reweight(const DenseVector& a, const DenseMatrix& e);
/// pᵢⱼ = (vᵢᵀ W) ⊙ vⱼ.
DenseVector bilinear_pair(std::span<const double> vi, std::span<const double> vj,
                          const DenseMatrix& w);
/// Index of the bilinear matrix used by pair (i, j) under `type`.
std::size_t bilinear_index(FieldType type, std::size_t i, std::size_t j, std::size_t pair,
                           std::size_t num_fields);
/// Pairwise interactions for i < j in lexicographic order, one row each.
/// An empty `matrices` selects the Hadamard product.
DenseMatrix interact(const DenseMatrix& emb, FieldType type,
                     std::span<const DenseMatrix> matrices);
/// c = [p₁,…,pₙ,q₁,…,qₙ], flattened.
DenseVector combine(const DenseMatrix& p, const DenseMatrix& q);
double shallow_head(const DenseVector& c);
/// |L| relu layers (optionally with inverted dropout) then the affine head.
/// Returns the head's pre-sigmoid output.
double dnn_forward(const DenseVector& input, const ModelParams& params, double dropout_rate,
                   numeric::Rng* dropout_rng);

}  // namespace layers

/// Cached activations of one forward pass over a batch. Consumed by backward.
struct ForwardTrace {
  bool live = false;
  bool training = false;
  data::ExampleBatch batch;
  DenseMatrix embedded;     ///< N × f·k
  DenseMatrix squeezed;     ///< N × f
  DenseMatrix senet_pre1;   ///< N × hidden (pre-relu)
  DenseMatrix senet_pre2;   ///< N × f (pre-relu)
  DenseMatrix weights;      ///< N × f, A
  DenseMatrix reweighted;   ///< N × f·k, V
  DenseMatrix left_proj_p;  ///< N × n·k, vᵢᵀW for bilinear p-path pairs
  DenseMatrix left_proj_q;
  DenseMatrix combined;     ///< N × combined width
  std::vector<DenseMatrix> dnn_pre;   ///< per layer N × width
  std::vector<DenseMatrix> dnn_post;  ///< after relu and dropout
  std::vector<DenseMatrix> dnn_mask;  ///< scaled keep masks, empty unless training
  std::vector<double> logits;
  std::vector<double> predictions;
};

class Network {
 public:
  Network(ModelConfig config, data::FieldSchema schema);

  const ModelConfig& config() const noexcept { return config_; }
  const Architecture& architecture() const noexcept { return arch_; }
  const data::FieldSchema& schema() const noexcept { return schema_; }

  ModelParams initialize(numeric::Rng& rng) const {
    return ModelParams::initialize(config_, schema_, rng);
  }

  /// Forward pass. Dropout is active only when `training` and a generator is given.
  ForwardTrace forward(const data::ExampleBatch& batch, const ModelParams& params, bool training,
                       numeric::Rng* dropout_rng = nullptr) const;
  /// Predicted click probabilities, inference mode.
  std::vector<double> predict(const data::ExampleBatch& batch, const ModelParams& params) const;

  /// Gradients of the batch-mean cross-entropy. Consumes the trace.
  GradientTape backward(ForwardTrace& trace, std::span<const std::uint8_t> labels,
                        const ModelParams& params) const;

  /// Mean cross-entropy of an inference-mode forward pass.
  double loss(const data::ExampleBatch& batch, const ModelParams& params) const;

  /// Names of the parameter blocks that influence the output.
  std::vector<std::string> active_blocks(const ModelParams& params) const;

 private:
  void check_batch(const data::ExampleBatch& batch, const ModelParams& params) const;

  ModelConfig config_;
  Architecture arch_;
  data::FieldSchema schema_;
};

// Checkpoint: "FIBN1", u32 length + JSON header (schema and config), u32
// block count, then per block: u32 name length, name, u32 rank, u64 dims,
// little-endian f64 data.
struct Checkpoint {
  data::FieldSchema schema;
  ModelConfig config;
  ModelParams params;
};

std::string config_to_json(const data::FieldSchema& schema, const ModelConfig& config);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fibinet::model
