#pragma once

#include <random>
#include <string>
#include <vector>

#include "musg/autodiff.hpp"

namespace musg::nn {

using ad::Var;

template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
};

// Owns the trainable tensors of one model, in registration order. Names are
// unique; that order is also the checkpoint order.
template <typename T>
class ParameterStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> init);

  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  const Parameter<T>* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

  // Value snapshot / restore, used to keep the best-validation weights.
  std::vector<Tensor<T>> snapshot() const;
  void restore(const std::vector<Tensor<T>>& values);

 private:
  std::vector<Parameter<T>> params_;
};

// Weights and bias drawn from U(-sqrt(1/fan_in), sqrt(1/fan_in)).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, bool with_bias,
         std::mt19937_64& rng);

  Var<T> operator()(const Var<T>& x) const;
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Var<T> weight_;
  Var<T> bias_;  // undefined when built without bias
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t dim);
  Var<T> operator()(const Var<T>& x) const;

 private:
  Var<T> gain_, bias_;
};

// Linear -> ReLU -> Linear.
template <typename T>
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
       std::mt19937_64& rng);
  Var<T> operator()(const Var<T>& x) const;
  const Linear<T>& first() const { return fc1_; }
  const Linear<T>& second() const { return fc2_; }

 private:
  Linear<T> fc1_, fc2_;
};

// Table rows drawn from N(0, 1).
template <typename T>
Var<T> make_embedding_table(ParameterStore<T>& store, const std::string& name, std::size_t vocab,
                            std::size_t dim, std::mt19937_64& rng);

}  // namespace musg::nn
