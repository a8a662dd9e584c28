#pragma once

// Flat named-tensor files.
//
// Layout (little-endian):
//   magic   "PEGTNSR1"                8 bytes
//   count   u64
//   count x { name_len u32, name bytes, ndim u32, dims u64[ndim],
//             values f64[prod(dims)] row-major }

#include "pegcl/rl/sac.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::rl {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

inline constexpr char kTensorMagic[8] = {'P', 'E', 'G', 'T', 'N', 'S', 'R', '1'};

namespace detail {
template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw std::runtime_error("truncated tensor file");
  return v;
}
}  // namespace detail

inline void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kTensorMagic, sizeof(kTensorMagic));
  detail::write_pod<std::uint64_t>(os, tensors.size());
  for (const auto& t : tensors) {
    std::uint64_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.values.size()) throw std::invalid_argument("tensor " + t.name + " shape does not match values");
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

inline std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open tensor file " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a tensor file");
  const auto count = detail::read_pod<std::uint64_t>(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name.resize(detail::read_pod<std::uint32_t>(is));
    is.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const auto ndim = detail::read_pod<std::uint32_t>(is);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(detail::read_pod<std::uint64_t>(is));
      n *= t.shape.back();
    }
    t.values.resize(n);
    is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("truncated tensor file " + path.string());
    out.push_back(std::move(t));
  }
  return out;
}

inline const NamedTensor& find_tensor(const std::vector<NamedTensor>& ts, const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return t;
  throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
}

template <typename T>
void append_network(std::vector<NamedTensor>& out, const std::string& prefix, const Mlp<T>& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    NamedTensor tw{prefix + "." + std::to_string(l) + ".weight", {std::uint64_t(w.rows()), std::uint64_t(w.cols())}, {}};
    tw.values.reserve(std::size_t(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) tw.values.push_back(static_cast<double>(w(r, c)));
    NamedTensor tb{prefix + "." + std::to_string(l) + ".bias", {std::uint64_t(b.size())}, {}};
    for (Eigen::Index r = 0; r < b.size(); ++r) tb.values.push_back(static_cast<double>(b[r]));
    out.push_back(std::move(tw));
    out.push_back(std::move(tb));
  }
}

template <typename T>
void restore_network(const std::vector<NamedTensor>& ts, const std::string& prefix, Mlp<T>& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& s = net.layers()[l];
    const auto& tw = find_tensor(ts, prefix + "." + std::to_string(l) + ".weight");
    const auto& tb = find_tensor(ts, prefix + "." + std::to_string(l) + ".bias");
    if (tw.shape != std::vector<std::uint64_t>{std::uint64_t(s.out), std::uint64_t(s.in)} ||
        tb.shape != std::vector<std::uint64_t>{std::uint64_t(s.out)})
      throw std::runtime_error("checkpoint tensor shape mismatch for " + prefix);
    Eigen::Map<Matrix<T>> w(net.params().data() + s.weight_offset, s.out, s.in);
    for (int r = 0; r < s.out; ++r)
      for (int c = 0; c < s.in; ++c) w(r, c) = static_cast<T>(tw.values[std::size_t(r) * std::size_t(s.in) + std::size_t(c)]);
    for (int r = 0; r < s.out; ++r) net.params()[s.bias_offset + r] = static_cast<T>(tb.values[std::size_t(r)]);
  }
}

template <typename T>
NamedTensor flat_tensor(const std::string& name, const Vector<T>& v) {
  NamedTensor t{name, {std::uint64_t(v.size())}, {}};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.values.push_back(static_cast<double>(v[i]));
  return t;
}

template <typename T>
void restore_flat(const std::vector<NamedTensor>& ts, const std::string& name, Vector<T>& v) {
  const auto& t = find_tensor(ts, name);
  if (t.values.size() != std::size_t(v.size())) throw std::runtime_error("checkpoint size mismatch for " + name);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<T>(t.values[std::size_t(i)]);
}

template <typename T>
std::vector<NamedTensor> agent_tensors(SacAgent<T>& agent) {
  std::vector<NamedTensor> out;
  append_network(out, "actor", agent.actor());
  for (int i = 0; i < 2; ++i) {
    append_network(out, "critic" + std::to_string(i + 1), agent.critic(i));
    append_network(out, "target" + std::to_string(i + 1), agent.target(i));
  }
  out.push_back(flat_tensor("log_alpha", agent.log_alpha_param()));
  out.push_back(flat_tensor("optim.actor.m", agent.actor_optimizer().first_moment()));
  out.push_back(flat_tensor("optim.actor.v", agent.actor_optimizer().second_moment()));
  for (int i = 0; i < 2; ++i) {
    const std::string p = "optim.critic" + std::to_string(i + 1);
    out.push_back(flat_tensor(p + ".m", agent.critic_optimizer(i).first_moment()));
    out.push_back(flat_tensor(p + ".v", agent.critic_optimizer(i).second_moment()));
  }
  out.push_back(flat_tensor("optim.alpha.m", agent.alpha_optimizer().first_moment()));
  out.push_back(flat_tensor("optim.alpha.v", agent.alpha_optimizer().second_moment()));
  return out;
}

template <typename T>
void restore_agent(const std::vector<NamedTensor>& ts, SacAgent<T>& agent) {
  restore_network(ts, "actor", agent.actor());
  for (int i = 0; i < 2; ++i) {
    restore_network(ts, "critic" + std::to_string(i + 1), agent.critic(i));
    restore_network(ts, "target" + std::to_string(i + 1), agent.target(i));
  }
  restore_flat(ts, "log_alpha", agent.log_alpha_param());
  restore_flat(ts, "optim.actor.m", agent.actor_optimizer().first_moment());
  restore_flat(ts, "optim.actor.v", agent.actor_optimizer().second_moment());
  for (int i = 0; i < 2; ++i) {
    const std::string p = "optim.critic" + std::to_string(i + 1);
    restore_flat(ts, p + ".m", agent.critic_optimizer(i).first_moment());
    restore_flat(ts, p + ".v", agent.critic_optimizer(i).second_moment());
  }
  restore_flat(ts, "optim.alpha.m", agent.alpha_optimizer().first_moment());
  restore_flat(ts, "optim.alpha.v", agent.alpha_optimizer().second_moment());
}

}  // namespace pegcl::rl
