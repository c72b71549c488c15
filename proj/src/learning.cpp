#include "coagent/learning.hpp"

#include <cmath>

#include "coagent/error.hpp"

namespace coagent {

Vector local_log_prob_gradient(const CoagentSpec& coagent, std::span<const double> x, std::size_t u,
                               std::span<const double> params) {
  if (u >= coagent.num_outputs()) throw InputError("local_log_prob_gradient: output index out of range");
  const Vector probs = coagent_policy_probs(coagent, x, params);
  const std::size_t width = x.size() + 1;
  Vector grad(params.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double coeff = (j == u ? 1.0 : 0.0) - probs[j];
    double* block = grad.data() + j * width;
    for (std::size_t k = 0; k < x.size(); ++k) block[k] = coeff * x[k];
    block[x.size()] = coeff;
  }
  return grad;
}

Vector aggregate_unique_gradient(std::span<const double> non_unique, const SharingMap& sharing) {
  return sharing.aggregate(non_unique);
}

GradientBundle reinforce_gradient(const NetworkTopology& topology, std::span<const double> theta_nu,
                                  const Trajectory& trajectory, double gamma) {
  const std::size_t m = topology.size();
  GradientBundle bundle;
  bundle.per_coagent.resize(m);
  for (std::size_t i = 0; i < m; ++i) bundle.per_coagent[i].assign(topology.param_count(i), 0.0);

  const Vector returns = discounted_returns(trajectory.rewards(), gamma);
  double discount = 1.0;
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t, discount *= gamma) {
    const auto& step = trajectory.steps[t];
    if (step.executed.size() != m || step.inputs.size() != m || step.outputs.size() != m) {
      throw InputError("reinforce_gradient: step " + std::to_string(t) + " is missing execution records");
    }
    const double weight = discount * returns[t];
    if (weight == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      if (!step.executed[i]) continue;
      const Vector score = local_log_prob_gradient(topology.coagent(i), step.inputs[i], step.outputs[i],
                                                   topology.coagent_params(theta_nu, i));
      Vector& acc = bundle.per_coagent[i];
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += weight * score[k];
    }
  }

  bundle.non_unique.reserve(topology.num_nonunique());
  for (const auto& g : bundle.per_coagent) bundle.non_unique.insert(bundle.non_unique.end(), g.begin(), g.end());
  bundle.unique = aggregate_unique_gradient(bundle.non_unique, topology.sharing());
  return bundle;
}

void adam_step(AdamState& state, std::span<const double> grad, std::span<double> params) {
  if (grad.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw InputError("adam_step: length mismatch");
  }
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.first_moment[k] = o.beta1 * state.first_moment[k] + (1.0 - o.beta1) * grad[k];
    state.second_moment[k] = o.beta2 * state.second_moment[k] + (1.0 - o.beta2) * grad[k] * grad[k];
    const double m_hat = state.first_moment[k] / correction1;
    const double v_hat = state.second_moment[k] / correction2;
    params[k] += o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

GradientBundle reinforce_episode_update(Network& network, const Trajectory& trajectory, double gamma,
                                        AdamState& adam) {
  const Vector theta_nu = network.store.expand();
  GradientBundle bundle = reinforce_gradient(network.topology, theta_nu, trajectory, gamma);
  adam_step(adam, bundle.unique, network.store.unique);
  return bundle;
}

CriticNet::CriticNet(std::size_t input_dim, Rng& rng) : input_dim_(input_dim) {
  const std::size_t d = input_dim;
  params_.assign(kHidden * d + kHidden + kHidden * kHidden + kHidden + kHidden + 1, 0.0);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(kHidden));
  std::size_t k = 0;
  for (; k < kHidden * d + kHidden; ++k) params_[k] = rng.uniform(-bound1, bound1);
  for (; k < kHidden * d + kHidden + kHidden * kHidden + kHidden; ++k) params_[k] = rng.uniform(-bound2, bound2);
  // output layer stays zero
}

namespace {

struct CriticLayout {
  std::size_t w1, b1, w2, b2, w3, b3;
  explicit CriticLayout(std::size_t d) {
    constexpr std::size_t H = CriticNet::kHidden;
    w1 = 0;
    b1 = w1 + H * d;
    w2 = b1 + H;
    b2 = w2 + H * H;
    w3 = b2 + H;
    b3 = w3 + H;
  }
};

}  // namespace

double CriticNet::value(std::span<const double> x) const { return evaluate(x, nullptr); }

double CriticNet::value_and_gradient(std::span<const double> x, Vector& grad) const { return evaluate(x, &grad); }

double CriticNet::evaluate(std::span<const double> x, Vector* out) const {
  if (x.size() != input_dim_) throw InputError("critic: input dimension mismatch");
  constexpr std::size_t H = kHidden;
  const std::size_t d = input_dim_;
  const CriticLayout L(d);
  const double* p = params_.data();

  double h1[H];
  double h2[H];
  for (std::size_t r = 0; r < H; ++r) {
    double s = p[L.b1 + r];
    const double* row = p + L.w1 + r * d;
    for (std::size_t c = 0; c < d; ++c) s += row[c] * x[c];
    h1[r] = std::tanh(s);
  }
  for (std::size_t r = 0; r < H; ++r) {
    double s = p[L.b2 + r];
    const double* row = p + L.w2 + r * H;
    for (std::size_t c = 0; c < H; ++c) s += row[c] * h1[c];
    h2[r] = std::tanh(s);
  }
  double v = p[L.b3];
  for (std::size_t c = 0; c < H; ++c) v += p[L.w3 + c] * h2[c];

  if (out == nullptr) return v;
  Vector& grad = *out;
  grad.assign(params_.size(), 0.0);
  // output layer
  for (std::size_t c = 0; c < H; ++c) grad[L.w3 + c] = h2[c];
  grad[L.b3] = 1.0;
  // second hidden layer
  double delta2[H];
  for (std::size_t r = 0; r < H; ++r) {
    delta2[r] = p[L.w3 + r] * (1.0 - h2[r] * h2[r]);
    grad[L.b2 + r] = delta2[r];
    double* row = grad.data() + L.w2 + r * H;
    for (std::size_t c = 0; c < H; ++c) row[c] = delta2[r] * h1[c];
  }
  // first hidden layer
  for (std::size_t c = 0; c < H; ++c) {
    double back = 0.0;
    for (std::size_t r = 0; r < H; ++r) back += p[L.w2 + r * H + c] * delta2[r];
    const double delta1 = back * (1.0 - h1[c] * h1[c]);
    grad[L.b1 + c] = delta1;
    double* row = grad.data() + L.w1 + c * d;
    for (std::size_t k = 0; k < d; ++k) row[k] = delta1 * x[k];
  }
  return v;
}

Vector ObservationNormalizer::variance() const {
  Vector var(mean_.size(), 0.0);
  if (count_ == 0) return var;
  for (std::size_t k = 0; k < var.size(); ++k) var[k] = m2_[k] / static_cast<double>(count_);
  return var;
}

Vector ObservationNormalizer::normalize(std::span<const double> obs, bool update) {
  if (obs.size() != mean_.size()) throw InputError("normalize_observation: dimension mismatch");
  if (update) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const double delta = obs[k] - mean_[k];
      mean_[k] += delta / n;
      m2_[k] += delta * (obs[k] - mean_[k]);
    }
  }
  if (count_ <= 1) return Vector(obs.begin(), obs.end());
  const double n = static_cast<double>(count_);
  Vector out(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    out[k] = (obs[k] - mean_[k]) / std::sqrt(m2_[k] / n + 1e-8);
  }
  return out;
}

void TraceState::reset() {
  std::fill(actor.begin(), actor.end(), 0.0);
  std::fill(critic.begin(), critic.end(), 0.0);
}

void accumulate_trace(std::span<double> trace, std::span<const double> grad, double gamma, double lambda) {
  if (trace.size() != grad.size()) throw std::logic_error("trace length does not match gradient length");
  const double decay = gamma * lambda;
  for (std::size_t k = 0; k < trace.size(); ++k) trace[k] = decay * trace[k] + grad[k];
}

ActorCriticState::ActorCriticState(const Network& network, const CriticNet& critic, const Hyperparameters& hp)
    : traces(network.store.unique.size(), critic.num_params(), hp.lambda_actor, hp.lambda_critic),
      actor_adam(hp.actor_adam(), network.store.unique.size()),
      critic_adam(hp.critic_adam(), critic.num_params()),
      actor_accum(network.store.unique.size(), 0.0),
      critic_accum(critic.num_params(), 0.0),
      theta_nu(network.store.expand()) {
  if (hp.batch_actor == 0 || hp.batch_critic == 0) throw ValidationError("batch sizes must be positive");
}

Vector actor_step_gradient(const NetworkTopology& topology, std::span<const double> theta_nu,
                           const AtomicStepRecord& record) {
  Vector non_unique(topology.num_nonunique(), 0.0);
  for (std::size_t i = 0; i < topology.size(); ++i) {
    if (!record.executed[i]) continue;
    const Vector score = local_log_prob_gradient(topology.coagent(i), record.inputs[i], record.outputs[i],
                                                 topology.coagent_params(theta_nu, i));
    std::copy(score.begin(), score.end(), non_unique.begin() + static_cast<std::ptrdiff_t>(topology.param_offset(i)));
  }
  return aggregate_unique_gradient(non_unique, topology.sharing());
}

namespace {

/// Adds delta * trace to the accumulator and takes an Adam step once the
/// batch is full. Returns true when parameters changed.
bool accumulate_and_step(Vector& accum, std::size_t& pending, std::size_t batch, std::span<const double> trace,
                         double delta, AdamState& adam, std::span<double> params) {
  for (std::size_t k = 0; k < accum.size(); ++k) accum[k] += delta * trace[k];
  if (++pending < batch) return false;
  const double scale = 1.0 / static_cast<double>(pending);
  for (double& a : accum) a *= scale;
  adam_step(adam, accum, params);
  std::fill(accum.begin(), accum.end(), 0.0);
  pending = 0;
  return true;
}

}  // namespace

double actor_critic_step(Network& network, CriticNet& critic, const Transition& tr, ActorCriticState& state,
                         const Hyperparameters& hp) {
  if (state.traces.actor.size() != network.store.unique.size() ||
      state.traces.critic.size() != critic.num_params()) {
    throw std::logic_error("actor_critic_step: trace lengths do not match parameter vectors");
  }
  Vector critic_grad;
  const double v = critic.value_and_gradient(tr.observation, critic_grad);
  const double v_next = tr.done ? 0.0 : critic.value(tr.next_observation);
  const double delta = tr.reward + hp.gamma * v_next - v;

  const Vector actor_grad = actor_step_gradient(network.topology, state.theta_nu, tr.record);
  accumulate_trace(state.traces.critic, critic_grad, hp.gamma, state.traces.lambda_critic);
  accumulate_trace(state.traces.actor, actor_grad, hp.gamma, state.traces.lambda_actor);

  accumulate_and_step(state.critic_accum, state.critic_pending, hp.batch_critic, state.traces.critic, delta,
                      state.critic_adam, critic.params());
  if (accumulate_and_step(state.actor_accum, state.actor_pending, hp.batch_actor, state.traces.actor, delta,
                          state.actor_adam, network.store.unique)) {
    state.theta_nu = network.store.expand();
  }
  return delta;
}

}  // namespace coagent
