#include "musg/nn.hpp"

#include <cmath>

namespace musg::nn {

template <typename T>
Var<T> ParameterStore<T>::add(const std::string& name, Tensor<T> init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  auto v = Var<T>::leaf(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

template <typename T>
std::vector<Tensor<T>> ParameterStore<T>::snapshot() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var.value());
  return out;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<Tensor<T>>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i].var.value()))
      throw std::invalid_argument("restore: shape mismatch for " + params_[i].name);
    params_[i].var.mutable_value() = values[i];
  }
}

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                  bool with_bias, std::mt19937_64& rng)
    : in_(in), out_(out) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> w(out, in);
  for (auto& v : w.data()) v = static_cast<T>(dist(rng));
  weight_ = store.add(name + ".weight", std::move(w));
  if (with_bias) {
    Tensor<T> b(1, out);
    for (auto& v : b.data()) v = static_cast<T>(dist(rng));
    bias_ = store.add(name + ".bias", std::move(b));
  }
}

template <typename T>
Var<T> Linear<T>::operator()(const Var<T>& x) const {
  return bias_.defined() ? ad::linear(x, weight_, bias_) : ad::linear(x, weight_);
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t dim) {
  gain_ = store.add(name + ".gain", Tensor<T>(1, dim, T(1)));
  bias_ = store.add(name + ".bias", Tensor<T>(1, dim, T(0)));
}

template <typename T>
Var<T> LayerNorm<T>::operator()(const Var<T>& x) const {
  return ad::layer_norm(x, gain_, bias_);
}

template <typename T>
Mlp2<T>::Mlp2(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t hidden,
              std::size_t out, std::mt19937_64& rng)
    : fc1_(store, name + ".fc1", in, hidden, true, rng), fc2_(store, name + ".fc2", hidden, out, true, rng) {}

template <typename T>
Var<T> Mlp2<T>::operator()(const Var<T>& x) const {
  return fc2_(ad::relu(fc1_(x)));
}

template <typename T>
Var<T> make_embedding_table(ParameterStore<T>& store, const std::string& name, std::size_t vocab,
                            std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<T> t(vocab, dim);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return store.add(name, std::move(t));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Mlp2<float>;
template class Mlp2<double>;
template Var<float> make_embedding_table(ParameterStore<float>&, const std::string&, std::size_t, std::size_t,
                                         std::mt19937_64&);
template Var<double> make_embedding_table(ParameterStore<double>&, const std::string&, std::size_t, std::size_t,
                                          std::mt19937_64&);

}  // namespace musg::nn
