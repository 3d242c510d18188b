#include "emocause/encoder.hpp"

#include "emocause/error.hpp"

namespace emocause {

Activation parse_activation(std::string_view name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected gelu or relu)");
}

std::string to_string(Activation activation) { return activation == Activation::gelu ? "gelu" : "relu"; }

void EncoderConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_positions == 0 || vocab_size == 0) {
    throw ConfigError("encoder dimensions must all be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("encoder dropout must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
}

namespace {

std::string layer_prefix(std::size_t layer) { return "encoder.layer" + std::to_string(layer) + "."; }

void add_dense(ParamStore& params, const std::string& name, std::size_t out, std::size_t in, double scale,
               Rng& rng) {
  params.add_uniform(name + ".weight", {out, in}, scale, rng);
  params.add_constant(name + ".bias", {out}, 0.0);
}

void add_norm(ParamStore& params, const std::string& name, std::size_t width) {
  params.add_constant(name + ".gain", {width}, 1.0);
  params.add_constant(name + ".bias", {width}, 0.0);
}

Tensor dense(const Tensor& x, const ParamStore& params, const std::string& name) {
  return add_row(matmul_nt(x, params.get(name + ".weight")), params.get(name + ".bias"));
}

Tensor norm(const Tensor& x, const ParamStore& params, const std::string& name, double eps) {
  return layer_norm(x, params.get(name + ".gain"), params.get(name + ".bias"), eps);
}

}  // namespace

void init_encoder_params(ParamStore& params, const EncoderConfig& config, Rng& rng, double scale) {
  config.validate();
  const std::size_t d = config.d_model;
  params.add_uniform("encoder.token_embedding", {config.vocab_size, d}, scale, rng);
  params.add_uniform("encoder.position_embedding", {config.max_positions, d}, scale, rng);
  params.add_uniform("encoder.segment_embedding", {2, d}, scale, rng);
  add_norm(params, "encoder.embedding_norm", d);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    add_dense(params, p + "attention.query", d, d, scale, rng);
    add_dense(params, p + "attention.key", d, d, scale, rng);
    add_dense(params, p + "attention.value", d, d, scale, rng);
    add_dense(params, p + "attention.output", d, d, scale, rng);
    add_norm(params, p + "attention_norm", d);
    add_dense(params, p + "ffn.in", config.d_ff, d, scale, rng);
    add_dense(params, p + "ffn.out", d, config.d_ff, scale, rng);
    add_norm(params, p + "ffn_norm", d);
  }
}

EncoderOutput encode(std::span<const EncodedInput* const> batch, const ParamStore& params,
                     const EncoderConfig& config, bool training, Rng& rng, EncoderTrace* trace) {
  if (batch.empty()) throw DataError("encode: empty batch");
  EncoderOutput out;
  std::vector<std::size_t> token_ids, positions, segments;
  for (const EncodedInput* input : batch) {
    const std::size_t len = input->valid_length();
    if (len == 0) throw DataError("encode: input has no unpadded positions");
    if (len > config.max_positions) {
      throw DataError("encode: input of length " + std::to_string(len) + " exceeds max_positions " +
                      std::to_string(config.max_positions));
    }
    out.sequences.push_back({token_ids.size(), len});
    for (std::size_t i = 0; i < len; ++i) {
      if (!input->attention_mask[i]) throw DataError("encode: attention mask is not a prefix");
      const int id = input->token_ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
        throw DataError("encode: token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(config.vocab_size));
      }
      token_ids.push_back(static_cast<std::size_t>(id));
      positions.push_back(i);
      segments.push_back(input->segment_ids[i] == 0 ? 0 : 1);
    }
  }

  const double eps = config.layer_norm_eps;
  Tensor x = add(add(gather_rows(params.get("encoder.token_embedding"), token_ids),
                     gather_rows(params.get("encoder.position_embedding"), positions)),
                 gather_rows(params.get("encoder.segment_embedding"), segments));
  x = dropout(norm(x, params, "encoder.embedding_norm", eps), config.dropout_p, training, rng);

  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    const Tensor q = dense(x, params, p + "attention.query");
    const Tensor k = dense(x, params, p + "attention.key");
    const Tensor v = dense(x, params, p + "attention.value");
    std::vector<std::vector<double>>* probs = nullptr;
    if (trace) probs = &trace->attention.emplace_back();
    const Tensor attended = dense(self_attention(q, k, v, out.sequences, config.n_heads, probs), params,
                                  p + "attention.output");
    x = norm(add(x, dropout(attended, config.dropout_p, training, rng)), params, p + "attention_norm", eps);

    Tensor inner = dense(x, params, p + "ffn.in");
    inner = config.activation == Activation::gelu ? gelu(inner) : relu(inner);
    const Tensor ffn = dense(inner, params, p + "ffn.out");
    x = norm(add(x, dropout(ffn, config.dropout_p, training, rng)), params, p + "ffn_norm", eps);
  }
  out.hidden = x;
  return out;
}

Tensor encode(const EncodedInput& input, const ParamStore& params, const EncoderConfig& config, bool training,
              Rng& rng) {
  const EncodedInput* one[] = {&input};
  return encode(one, params, config, training, rng).hidden;
}

}  // namespace emocause
