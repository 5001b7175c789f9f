#include "musg/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace musg {

template <typename T>
void adam_step(std::vector<nn::Parameter<T>>& params, AdamState<T>& state, const AdamOptions& opt) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.var.value().rows(), p.var.value().cols());
      state.v.emplace_back(p.var.value().rows(), p.var.value().cols());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& var = params[p].var;
    auto& w = var.mutable_value();
    const auto& g = std::as_const(var).grad();
    const bool has_grad = g.size() == w.size();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? static_cast<double>(g[i]) : 0.0;
      m[i] = static_cast<T>(opt.beta1 * m[i] + (1.0 - opt.beta1) * gi);
      v[i] = static_cast<T>(opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      double wi = w[i];
      wi -= opt.lr * opt.weight_decay * wi;
      wi -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
      w[i] = static_cast<T>(wi);
    }
  }
}

template void adam_step(std::vector<nn::Parameter<float>>&, AdamState<float>&, const AdamOptions&);
template void adam_step(std::vector<nn::Parameter<double>>&, AdamState<double>&, const AdamOptions&);

GradCheckResult grad_check(const std::function<ad::Var<double>()>& loss,
                           std::vector<nn::Parameter<double>>& params, const GradCheckOptions& opt) {
  for (auto& p : params) p.var.zero_grad();
  loss().backward();
  std::vector<Tensor<double>> analytic;
  for (auto& p : params) {
    const auto& g = std::as_const(p.var).grad();
    analytic.push_back(g.size() == p.var.value().size() ? g : Tensor<double>(p.var.rows(), p.var.cols()));
  }

  GradCheckResult result;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].var.mutable_value();
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (opt.max_coords_per_param > 0 && coords.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(std::max(opt.subsample, opt.max_coords_per_param));
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double orig = w[i];
      w[i] = orig + opt.eps;
      const double up = loss().value()[0];
      w[i] = orig - opt.eps;
      const double down = loss().value()[0];
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (!(rel <= result.max_rel_error)) {  // also catches NaN
        result.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        result.worst_param = params[p].name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (auto& p : params) p.var.zero_grad();
  return result;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr char kMagic[4] = {'M', 'G', 'C', 'V'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const nn::ParameterStore<T>& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(store.params().size()));
  for (const auto& p : store.params()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& v = p.var.value();
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(v.rows()));
    put_u32(out, static_cast<std::uint32_t>(v.cols()));
    for (T x : v.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

template <typename T>
void load_checkpoint(const std::string& path, nn::ParameterStore<T>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint (bad magic)");
  const int version = in.get();
  if (version != kVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
  const std::uint32_t count = get_u32(in, path);
  if (count != store.params().size())
    throw std::runtime_error(path + ": checkpoint has " + std::to_string(count) + " records, model has " +
                             std::to_string(store.params().size()));
  for (auto& p : store.params()) {
    const std::uint32_t len = get_u32(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw std::runtime_error(path + ": truncated checkpoint");
    if (name != p.name) throw std::runtime_error(path + ": expected parameter '" + p.name + "', found '" + name + "'");
    const std::uint32_t rank = get_u32(in, path);
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = get_u32(in, path);
    auto& v = p.var.mutable_value();
    if (rank != 2 || dims[0] != v.rows() || dims[1] != v.cols())
      throw std::runtime_error(path + ": shape mismatch for '" + name + "'");
    for (auto& x : v.data()) x = static_cast<T>(std::bit_cast<float>(get_u32(in, path)));
  }
}

template void save_checkpoint(const std::string&, const nn::ParameterStore<float>&);
template void save_checkpoint(const std::string&, const nn::ParameterStore<double>&);
template void load_checkpoint(const std::string&, nn::ParameterStore<float>&);
template void load_checkpoint(const std::string&, nn::ParameterStore<double>&);

}  // namespace musg
