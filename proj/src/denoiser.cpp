#include "bridgecat/denoiser.hpp"

#include "bridgecat/elements.hpp"

#include <cmath>
#include <stdexcept>

namespace bridgecat {

void DenoiserConfig::validate() const {
  if (hidden <= 0) throw std::invalid_argument("hidden must be positive");
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (cutoff <= 0.0) throw std::invalid_argument("cutoff must be positive");
  if (num_rbf <= 0) throw std::invalid_argument("num_rbf must be positive");
  if (n_frequencies <= 0) throw std::invalid_argument("n_frequencies must be positive");
  if (out_channels != 3 && out_channels != 1) {
    throw std::invalid_argument("out_channels must be 3 (vector) or 1 (scalar)");
  }
  if (max_atomic_number < 1) throw std::invalid_argument("max_atomic_number must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("time_embed_dim must be even and >= 2");
  }
}

double envelope_poly(double x, int exponent) {
  if (x >= 1.0) return 0.0;
  if (x < 0.0) throw std::invalid_argument("envelope argument must be nonnegative");
  const double p = static_cast<double>(exponent);
  const double a = -(p + 1.0) * (p + 2.0) / 2.0;
  const double b = p * (p + 2.0);
  const double c = -p * (p + 1.0) / 2.0;
  return 1.0 + a * std::pow(x, p) + b * std::pow(x, p + 1.0) + c * std::pow(x, p + 2.0);
}

Eigen::VectorXd rbf_expand(double d, double cutoff, int num_rbf, int envelope_exponent) {
  if (d <= 0.0) throw std::invalid_argument("rbf_expand requires d > 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_rbf);
  if (d >= cutoff) return out;
  const double gamma = (static_cast<double>(num_rbf) / cutoff) *
                       (static_cast<double>(num_rbf) / cutoff);
  const double env = envelope_poly(d / cutoff, envelope_exponent);
  for (int k = 1; k <= num_rbf; ++k) {
    double mu = cutoff * static_cast<double>(k) / static_cast<double>(num_rbf);
    out[k - 1] = std::exp(-gamma * (d - mu) * (d - mu)) * env;
  }
  return out;
}

Eigen::VectorXd fourier_frac_features(const Vec3& frac_displacement, int n_frequencies) {
  Eigen::VectorXd out(6 * n_frequencies);
  const double two_pi = 2.0 * M_PI;
  int idx = 0;
  for (int d = 0; d < 3; ++d) {
    for (int k = 1; k <= n_frequencies; ++k) {
      out[idx++] = std::sin(two_pi * k * frac_displacement[d]);
    }
  }
  for (int d = 0; d < 3; ++d) {
    for (int k = 1; k <= n_frequencies; ++k) {
      out[idx++] = std::cos(two_pi * k * frac_displacement[d]);
    }
  }
  return out;
}

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& [name, value] : params) {
    (void)name;
    n += static_cast<std::size_t>(value.size());
  }
  return n;
}

std::size_t parameter_count(const DenoiserConfig& config) {
  config.validate();
  const std::size_t f = static_cast<std::size_t>(config.hidden);
  const std::size_t d = static_cast<std::size_t>(config.time_embed_dim);
  const std::size_t z = static_cast<std::size_t>(config.max_atomic_number);
  const std::size_t edge_dim =
      static_cast<std::size_t>(config.num_rbf + 6 * config.n_frequencies + 1);
  const std::size_t pass = f * f + f + f * 3 * f + 3 * f + edge_dim * 3 * f;
  const std::size_t update = 2 * f * f + 2 * f * f + f + f * 3 * f + 3 * f;
  const std::size_t layer = 2 * pass + update;
  std::size_t head = (config.out_channels == 3) ? f : (f * f + f + f + 1);
  return z * f + d * f + f + static_cast<std::size_t>(config.layers) * layer + head;
}

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

Eigen::VectorXd time_sinusoid(double m_t, int dim) {
  // Standard sinusoidal embedding on m_t scaled to the usual integer range.
  const double x = 1000.0 * m_t;
  const int half = dim / 2;
  Eigen::VectorXd emb(dim);
  for (int k = 0; k < half; ++k) {
    double omega = std::exp(-std::log(10000.0) * static_cast<double>(k) /
                            static_cast<double>(half));
    emb[k] = std::sin(x * omega);
    emb[half + k] = std::cos(x * omega);
  }
  return emb;
}

/// Per-graph edge arrays prepared as tape constants.
struct EdgeData {
  std::vector<int> receiver; // atom i
  std::vector<int> sender;   // atom j
  Eigen::MatrixXd features;  // E x (num_rbf + 6*n_frequencies + 1)
  std::array<Eigen::VectorXd, 3> unit;
};

EdgeData make_edge_data(const std::vector<NeighborEdge>& edges, const Lattice& lattice,
                        const DenoiserConfig& config) {
  const int feat_dim = config.num_rbf + 6 * config.n_frequencies + 1;
  EdgeData data;
  const auto e_count = static_cast<Eigen::Index>(edges.size());
  data.features.resize(e_count, feat_dim);
  for (auto& u : data.unit) u.resize(e_count);
  data.receiver.reserve(edges.size());
  data.sender.reserve(edges.size());
  for (Eigen::Index e = 0; e < e_count; ++e) {
    const NeighborEdge& edge = edges[static_cast<std::size_t>(e)];
    data.receiver.push_back(edge.i);
    data.sender.push_back(edge.j);
    const double env = envelope_poly(edge.distance / config.cutoff, config.envelope_exponent);
    Eigen::VectorXd rbf =
        rbf_expand(edge.distance, config.cutoff, config.num_rbf, config.envelope_exponent);
    Vec3 displacement = edge.distance * edge.unit_vector;
    Vec3 frac = lattice.inverse().transpose() * displacement;
    Eigen::VectorXd four = fourier_frac_features(frac, config.n_frequencies);
    // The whole filter input (bias included) is scaled by the envelope so
    // filters vanish smoothly as edges leave the cutoff sphere.
    data.features.row(e).segment(0, config.num_rbf) = (env * rbf).transpose();
    data.features.row(e).segment(config.num_rbf, 6 * config.n_frequencies) =
        (env * four).transpose();
    data.features(e, feat_dim - 1) = env;
    for (int d = 0; d < 3; ++d) data.unit[d][e] = edge.unit_vector[d];
  }
  return data;
}

struct VectorVars {
  ad::Var x, y, z;
};

struct Net {
  ad::Tape tape;
  std::map<std::string, ad::Var> vars;

  Net(const ParameterSet& params, bool track) {
    for (const auto& [name, value] : params) {
      vars[name] = track ? tape.leaf(value) : tape.constant(value);
    }
  }

  ad::Var p(const std::string& name) {
    auto it = vars.find(name);
    if (it == vars.end()) throw std::invalid_argument("missing parameter: " + name);
    return it->second;
  }
};

ad::Var linear(Net& net, ad::Var input, const std::string& w, const std::string& b) {
  return net.tape.add_row(net.tape.matmul(input, net.p(w)), net.p(b));
}

struct MessageResult {
  ad::Var scalars;
  VectorVars vectors;
};

MessageResult message_pass(Net& net, ad::Var s, const VectorVars& v, const EdgeData& edges,
                           const std::string& prefix, Eigen::Index n_atoms, int hidden) {
  ad::Tape& t = net.tape;
  ad::Var phi = linear(net, t.silu(linear(net, s, prefix + ".phi.W1", prefix + ".phi.b1")),
                       prefix + ".phi.W2", prefix + ".phi.b2");
  ad::Var phi_e = t.gather_rows(phi, edges.sender);
  ad::Var filt = t.matmul(t.constant(edges.features), net.p(prefix + ".filter.W"));
  ad::Var msg = t.mul(phi_e, filt);
  ad::Var m1 = t.slice_cols(msg, 0, hidden);
  ad::Var m2 = t.slice_cols(msg, hidden, hidden);
  ad::Var m3 = t.slice_cols(msg, 2 * hidden, hidden);

  MessageResult out;
  out.scalars = t.add(s, t.scatter_add_rows(m1, edges.receiver, n_atoms));
  const std::array<ad::Var, 3> v_in = {v.x, v.y, v.z};
  std::array<ad::Var, 3> v_out;
  for (int d = 0; d < 3; ++d) {
    ad::Var vj = t.gather_rows(v_in[static_cast<std::size_t>(d)], edges.sender);
    ad::Var dv = t.add(t.mul(m2, vj), t.row_scale(m3, edges.unit[static_cast<std::size_t>(d)]));
    v_out[static_cast<std::size_t>(d)] =
        t.add(v_in[static_cast<std::size_t>(d)], t.scatter_add_rows(dv, edges.receiver, n_atoms));
  }
  out.vectors = {v_out[0], v_out[1], v_out[2]};
  return out;
}

MessageResult update_pass(Net& net, ad::Var s, const VectorVars& v, const std::string& prefix,
                          int hidden) {
  ad::Tape& t = net.tape;
  ad::Var U = net.p(prefix + ".U");
  ad::Var V = net.p(prefix + ".V");
  VectorVars uv{t.matmul(v.x, U), t.matmul(v.y, U), t.matmul(v.z, U)};
  VectorVars vv{t.matmul(v.x, V), t.matmul(v.y, V), t.matmul(v.z, V)};
  ad::Var sq = t.add(t.add(t.mul(vv.x, vv.x), t.mul(vv.y, vv.y)), t.mul(vv.z, vv.z));
  ad::Var vnorm = t.sqrt_shifted(sq, 1e-12);
  ad::Var a = linear(net, t.silu(linear(net, t.hcat(s, vnorm), prefix + ".W1", prefix + ".b1")),
                     prefix + ".W2", prefix + ".b2");
  ad::Var a1 = t.slice_cols(a, 0, hidden);
  ad::Var a2 = t.slice_cols(a, hidden, hidden);
  ad::Var a3 = t.slice_cols(a, 2 * hidden, hidden);
  ad::Var dot = t.add(t.add(t.mul(uv.x, vv.x), t.mul(uv.y, vv.y)), t.mul(uv.z, vv.z));

  MessageResult out;
  out.scalars = t.add(s, t.add(a1, t.mul(a2, dot)));
  out.vectors = {t.add(v.x, t.mul(a3, uv.x)), t.add(v.y, t.mul(a3, uv.y)),
                 t.add(v.z, t.mul(a3, uv.z))};
  return out;
}

struct BuildResult {
  ad::Var scalars;
  VectorVars vectors;
  VectorVars out; // vector head columns
  ad::Var logit;  // scalar head
};

std::vector<int> element_indices(const Structure& structure, const DenoiserConfig& config) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(structure.size()));
  for (int z : structure.atomic_numbers) {
    if (z < 1 || z > config.max_atomic_number) {
      throw std::invalid_argument("element outside embedding table");
    }
    idx.push_back(z - 1);
  }
  return idx;
}

ad::Var time_features(Net& net, double m_t, const DenoiserConfig& config) {
  Eigen::MatrixXd emb = time_sinusoid(m_t, config.time_embed_dim).transpose();
  return net.tape.add(net.tape.matmul(net.tape.constant(emb), net.p("embed.time.W")),
                      net.p("embed.time.b"));
}

BuildResult build_model(Net& net, const Structure& structure, const Positions& x_t,
                        double m_t, const DenoiserConfig& config) {
  config.validate();
  if (x_t.rows() != structure.size()) {
    throw std::invalid_argument("position array must match structure size");
  }
  ad::Tape& t = net.tape;
  const Eigen::Index n = structure.size();
  const int hidden = config.hidden;

  Structure frame = structure;
  frame.positions = x_t;
  NeighborGraph graph = build_neighbor_multigraph(frame, config.cutoff);
  std::vector<NeighborEdge> surface_edges;
  for (const NeighborEdge& e : graph.edges) {
    bool slab_only = !structure.adsorbate[static_cast<std::size_t>(e.i)] &&
                     !structure.adsorbate[static_cast<std::size_t>(e.j)];
    if (!config.surface_pass || slab_only) surface_edges.push_back(e);
  }
  EdgeData all_edges = make_edge_data(graph.edges, structure.lattice, config);
  EdgeData surf_edges = make_edge_data(surface_edges, structure.lattice, config);

  ad::Var t_feat = time_features(net, m_t, config);
  ad::Var s = t.add_row(t.gather_rows(net.p("embed.element"), element_indices(structure, config)),
                        t_feat);
  VectorVars v{t.constant(Eigen::MatrixXd::Zero(n, hidden)),
               t.constant(Eigen::MatrixXd::Zero(n, hidden)),
               t.constant(Eigen::MatrixXd::Zero(n, hidden))};

  for (int l = 0; l < config.layers; ++l) {
    const std::string block = "block" + std::to_string(l);
    s = t.add_row(s, t_feat);
    MessageResult m = message_pass(net, s, v, surf_edges, block + ".surf", n, hidden);
    m = message_pass(net, m.scalars, m.vectors, all_edges, block + ".all", n, hidden);
    m = update_pass(net, m.scalars, m.vectors, block + ".update", hidden);
    s = m.scalars;
    v = m.vectors;
  }

  BuildResult result;
  result.scalars = s;
  result.vectors = v;
  if (config.out_channels == 3) {
    ad::Var w = net.p("readout.vec");
    result.out = {t.matmul(v.x, w), t.matmul(v.y, w), t.matmul(v.z, w)};
  } else {
    ad::Var pooled = t.sum_rows(s);
    ad::Var h = t.silu(t.add(t.matmul(pooled, net.p("readout.scalar.W1")),
                             net.p("readout.scalar.b1")));
    result.logit = t.add(t.matmul(h, net.p("readout.scalar.W2")), net.p("readout.scalar.b2"));
  }
  return result;
}

Eigen::MatrixXd free_mask(const Structure& structure) {
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(structure.size(), 3);
  for (Eigen::Index i = 0; i < structure.size(); ++i) {
    if (!structure.fixed[static_cast<std::size_t>(i)]) mask.row(i).setOnes();
  }
  return mask;
}

} // namespace

ParameterSet init_parameters(const DenoiserConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int f = config.hidden;
  const int edge_dim = config.num_rbf + 6 * config.n_frequencies + 1;
  ParameterSet params;

  auto w = [&](const std::string& name, int rows, int cols, double damp = 1.0) {
    params[name] =
        random_matrix(rng, rows, cols, damp / std::sqrt(static_cast<double>(rows)));
  };
  auto zero = [&](const std::string& name, int rows, int cols) {
    params[name] = Eigen::MatrixXd::Zero(rows, cols);
  };
  // Residual-style damping on the last linear of each MLP: the gated
  // scalar/vector products otherwise amplify activations layer over layer.
  const double kResidualDamp = 0.1;

  params["embed.element"] = random_matrix(rng, config.max_atomic_number, f, 1.0);
  w("embed.time.W", config.time_embed_dim, f);
  zero("embed.time.b", 1, f);
  for (int l = 0; l < config.layers; ++l) {
    const std::string block = "block" + std::to_string(l);
    for (const char* pass : {".surf", ".all"}) {
      w(block + pass + ".phi.W1", f, f);
      zero(block + pass + ".phi.b1", 1, f);
      w(block + pass + ".phi.W2", f, 3 * f, kResidualDamp);
      zero(block + pass + ".phi.b2", 1, 3 * f);
      w(block + pass + ".filter.W", edge_dim, 3 * f);
    }
    w(block + ".update.U", f, f);
    w(block + ".update.V", f, f);
    w(block + ".update.W1", 2 * f, f);
    zero(block + ".update.b1", 1, f);
    w(block + ".update.W2", f, 3 * f, kResidualDamp);
    zero(block + ".update.b2", 1, 3 * f);
  }
  if (config.out_channels == 3) {
    w("readout.vec", f, 1);
  } else {
    w("readout.scalar.W1", f, f);
    zero("readout.scalar.b1", 1, f);
    // Damped so the untrained logit stays out of sigmoid saturation under
    // sum pooling.
    params["readout.scalar.W2"] =
        random_matrix(rng, f, 1, 0.1 / std::sqrt(static_cast<double>(f)));
    zero("readout.scalar.b2", 1, 1);
  }
  return params;
}

NodeState embed_atoms(const Structure& structure, int t, const BridgeSchedule& schedule,
                      const ParameterSet& params, const DenoiserConfig& config) {
  if (t < 0 || t > schedule.T) throw std::invalid_argument("timestep outside [0, T]");
  Net net(params, false);
  ad::Var t_feat = time_features(net, schedule.m[static_cast<std::size_t>(t)], config);
  ad::Var s = net.tape.add_row(
      net.tape.gather_rows(net.p("embed.element"), element_indices(structure, config)), t_feat);
  NodeState state;
  state.scalars = net.tape.value(s);
  for (auto& m : state.vectors) {
    m = Eigen::MatrixXd::Zero(structure.size(), config.hidden);
  }
  return state;
}

NodeState block_forward(const NodeState& state, const Structure& structure,
                        const Positions& x_t, int t, const BridgeSchedule& schedule,
                        int block_index, const ParameterSet& params,
                        const DenoiserConfig& config) {
  if (block_index < 0 || block_index >= config.layers) {
    throw std::invalid_argument("block index out of range");
  }
  if (state.scalars.rows() != structure.size() || state.scalars.cols() != config.hidden) {
    throw std::invalid_argument("node state shape mismatch");
  }
  Net net(params, false);
  ad::Tape& tp = net.tape;

  Structure frame = structure;
  frame.positions = x_t;
  NeighborGraph graph = build_neighbor_multigraph(frame, config.cutoff);
  std::vector<NeighborEdge> surface_edges;
  for (const NeighborEdge& e : graph.edges) {
    bool slab_only = !structure.adsorbate[static_cast<std::size_t>(e.i)] &&
                     !structure.adsorbate[static_cast<std::size_t>(e.j)];
    if (!config.surface_pass || slab_only) surface_edges.push_back(e);
  }
  EdgeData all_edges = make_edge_data(graph.edges, structure.lattice, config);
  EdgeData surf_edges = make_edge_data(surface_edges, structure.lattice, config);

  ad::Var t_feat = time_features(net, schedule.m[static_cast<std::size_t>(t)], config);
  ad::Var s = tp.add_row(tp.constant(state.scalars), t_feat);
  VectorVars v{tp.constant(state.vectors[0]), tp.constant(state.vectors[1]),
               tp.constant(state.vectors[2])};
  const std::string block = "block" + std::to_string(block_index);
  MessageResult m = message_pass(net, s, v, surf_edges, block + ".surf", structure.size(),
                                 config.hidden);
  m = message_pass(net, m.scalars, m.vectors, all_edges, block + ".all", structure.size(),
                   config.hidden);
  m = update_pass(net, m.scalars, m.vectors, block + ".update", config.hidden);

  NodeState out;
  out.scalars = tp.value(m.scalars);
  out.vectors = {tp.value(m.vectors.x), tp.value(m.vectors.y), tp.value(m.vectors.z)};
  return out;
}

struct ForwardContext::Impl {
  ad::Tape tape;
  std::map<std::string, ad::Var> param_vars;
  DenoiserConfig config;
  Positions eps;
  double confidence = 0.0;
  bool is_classifier = false;
  VectorVars out{};
  ad::Var logit{};
  Eigen::MatrixXd mask;
  ad::Var loss_var{};
  bool has_loss = false;
  bool backward_done = false;
};

ForwardContext ForwardContext::record_denoiser(const Structure& structure,
                                               const Positions& x_t, int t,
                                               const BridgeSchedule& schedule,
                                               const ParameterSet& params,
                                               const DenoiserConfig& config) {
  if (config.out_channels != 3) {
    throw std::invalid_argument("denoiser forward requires out_channels = 3");
  }
  if (t < 0 || t > schedule.T) throw std::invalid_argument("timestep outside [0, T]");
  ForwardContext ctx;
  ctx.impl_ = std::make_shared<Impl>();
  Impl& impl = *ctx.impl_;
  impl.config = config;
  Net net(params, true);
  BuildResult built =
      build_model(net, structure, x_t, schedule.m[static_cast<std::size_t>(t)], config);
  impl.tape = std::move(net.tape);
  impl.param_vars = std::move(net.vars);
  impl.out = built.out;
  impl.mask = free_mask(structure);
  impl.eps.resize(structure.size(), 3);
  impl.eps.col(0) = impl.tape.value(built.out.x);
  impl.eps.col(1) = impl.tape.value(built.out.y);
  impl.eps.col(2) = impl.tape.value(built.out.z);
  return ctx;
}

ForwardContext ForwardContext::record_classifier(const Structure& structure,
                                                 const ParameterSet& params,
                                                 const DenoiserConfig& config) {
  if (config.out_channels != 1) {
    throw std::invalid_argument("classifier forward requires out_channels = 1");
  }
  ForwardContext ctx;
  ctx.impl_ = std::make_shared<Impl>();
  Impl& impl = *ctx.impl_;
  impl.config = config;
  impl.is_classifier = true;
  Net net(params, true);
  BuildResult built = build_model(net, structure, structure.positions, 0.0, config);
  impl.tape = std::move(net.tape);
  impl.param_vars = std::move(net.vars);
  impl.logit = built.logit;
  impl.confidence = 1.0 / (1.0 + std::exp(-impl.tape.value(built.logit)(0, 0)));
  return ctx;
}

const Positions& ForwardContext::eps() const {
  if (impl_->is_classifier) throw std::logic_error("classifier context has no eps output");
  return impl_->eps;
}

double ForwardContext::confidence() const {
  if (!impl_->is_classifier) throw std::logic_error("denoiser context has no confidence");
  return impl_->confidence;
}

double ForwardContext::l1_loss(const Positions& target) {
  Impl& impl = *impl_;
  if (impl.is_classifier) throw std::logic_error("l1_loss requires a denoiser context");
  ad::Var pred = impl.tape.hcat(impl.tape.hcat(impl.out.x, impl.out.y), impl.out.z);
  impl.loss_var = impl.tape.l1_masked(pred, target, impl.mask);
  impl.has_loss = true;
  impl.backward_done = false;
  return impl.tape.value(impl.loss_var)(0, 0);
}

double ForwardContext::l2_loss(const Positions& target) {
  Impl& impl = *impl_;
  if (impl.is_classifier) throw std::logic_error("l2_loss requires a denoiser context");
  ad::Var pred = impl.tape.hcat(impl.tape.hcat(impl.out.x, impl.out.y), impl.out.z);
  impl.loss_var = impl.tape.mse_masked(pred, target, impl.mask);
  impl.has_loss = true;
  impl.backward_done = false;
  return impl.tape.value(impl.loss_var)(0, 0);
}

double ForwardContext::bce_loss(double label, double weight) {
  Impl& impl = *impl_;
  if (!impl.is_classifier) throw std::logic_error("bce_loss requires a classifier context");
  impl.loss_var = impl.tape.bce_with_logit(impl.logit, label, weight);
  impl.has_loss = true;
  impl.backward_done = false;
  return impl.tape.value(impl.loss_var)(0, 0);
}

ParameterSet ForwardContext::gradient() {
  Impl& impl = *impl_;
  if (!impl.has_loss) {
    throw std::logic_error("gradient requested without a recorded loss");
  }
  if (!impl.backward_done) {
    impl.tape.backward(impl.loss_var);
    impl.backward_done = true;
  }
  ParameterSet grads;
  for (const auto& [name, var] : impl.param_vars) {
    const Eigen::MatrixXd& g = impl.tape.grad(var);
    if (g.size() == 0) {
      grads[name] = Eigen::MatrixXd::Zero(impl.tape.value(var).rows(),
                                          impl.tape.value(var).cols());
    } else {
      grads[name] = g;
    }
  }
  return grads;
}

Positions denoiser_forward(const Structure& structure, const Positions& x_t, int t,
                           const BridgeSchedule& schedule, const ParameterSet& params,
                           const DenoiserConfig& config) {
  if (config.out_channels != 3) {
    throw std::invalid_argument("denoiser forward requires out_channels = 3");
  }
  if (t < 0 || t > schedule.T) throw std::invalid_argument("timestep outside [0, T]");
  Net net(params, false);
  BuildResult built =
      build_model(net, structure, x_t, schedule.m[static_cast<std::size_t>(t)], config);
  Positions eps(structure.size(), 3);
  eps.col(0) = net.tape.value(built.out.x);
  eps.col(1) = net.tape.value(built.out.y);
  eps.col(2) = net.tape.value(built.out.z);
  return eps;
}

double classifier_forward(const Structure& structure, const ParameterSet& params,
                          const DenoiserConfig& config) {
  if (config.out_channels != 1) {
    throw std::invalid_argument("classifier forward requires out_channels = 1");
  }
  Net net(params, false);
  BuildResult built = build_model(net, structure, structure.positions, 0.0, config);
  return 1.0 / (1.0 + std::exp(-net.tape.value(built.logit)(0, 0)));
}

DenoiserFn make_denoiser_fn(const ParameterSet& params, const DenoiserConfig& config,
                            const BridgeSchedule& schedule) {
  return [params, config, schedule](const Structure& structure, const Positions& x_t,
                                    int t) -> Positions {
    return denoiser_forward(structure, x_t, t, schedule, params, config);
  };
}

} // namespace bridgecat
