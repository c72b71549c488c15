#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coagent/mdp.hpp"
#include "coagent/network.hpp"
#include "coagent/rng.hpp"

namespace coagent {

/// d ln pi(u | x) / d params for a linear-softmax coagent. Block j is
/// (1{u = j} - pi_j) [x; 1].
Vector local_log_prob_gradient(const CoagentSpec& coagent, std::span<const double> x, std::size_t u,
                               std::span<const double> params);

struct GradientBundle {
  std::vector<Vector> per_coagent;
  Vector non_unique;  // concatenation of per_coagent
  Vector unique;      // g-sums of non_unique
};

/// Sum over slots sharing each unique parameter.
Vector aggregate_unique_gradient(std::span<const double> non_unique, const SharingMap& sharing);

/// Episode estimator: per coagent, the sum over its execution times of
/// gamma^t G_t d ln pi_i(X_t, U_t) / d theta_i, then aggregated to the
/// unique space. Atomic time indexes the discount.
GradientBundle reinforce_gradient(const NetworkTopology& topology, std::span<const double> theta_nu,
                                  const Trajectory& trajectory, double gamma);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  Vector first_moment;
  Vector second_moment;
  std::size_t step = 0;

  AdamState() = default;
  AdamState(AdamOptions opts, std::size_t size)
      : options(opts), first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// Bias-corrected Adam step in the ascent direction (params += update).
void adam_step(AdamState& state, std::span<const double> grad, std::span<double> params);

/// Runs the REINFORCE analogue on one finished episode and applies an
/// Adam ascent step to the unique parameters.
GradientBundle reinforce_episode_update(Network& network, const Trajectory& trajectory, double gamma,
                                        AdamState& adam);

/// Fully connected value network: input -> 64 tanh -> 64 tanh -> scalar.
class CriticNet {
 public:
  static constexpr std::size_t kHidden = 64;

  CriticNet() = default;
  /// Hidden weights and biases uniform in +-1/sqrt(fan_in); output layer zero.
  CriticNet(std::size_t input_dim, Rng& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double value(std::span<const double> x) const;

  /// Value, with dV/dparams written into `grad` (resized to num_params()).
  double value_and_gradient(std::span<const double> x, Vector& grad) const;

 private:
  double evaluate(std::span<const double> x, Vector* grad) const;

  std::size_t input_dim_ = 0;
  Vector params_;  // W1 (64 x d), b1, W2 (64 x 64), b2, w3 (64), b3
};

/// Running per-dimension mean and variance (Welford).
class ObservationNormalizer {
 public:
  ObservationNormalizer() = default;
  explicit ObservationNormalizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::size_t dim() const { return mean_.size(); }
  std::size_t count() const { return count_; }
  const Vector& mean() const { return mean_; }
  /// Population variance per dimension.
  Vector variance() const;

  /// (obs - mean) / sqrt(var + 1e-8), after folding obs into the
  /// statistics when `update` is set. Identity while count <= 1.
  Vector normalize(std::span<const double> obs, bool update);

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Vector m2_;
};

struct TraceState {
  Vector actor;   // unique-parameter space
  Vector critic;
  double lambda_actor = 0.0;
  double lambda_critic = 0.0;

  TraceState() = default;
  TraceState(std::size_t actor_size, std::size_t critic_size, double lam_actor, double lam_critic)
      : actor(actor_size, 0.0), critic(critic_size, 0.0), lambda_actor(lam_actor), lambda_critic(lam_critic) {}

  void reset();
};

/// z <- gamma lambda z + grad.
void accumulate_trace(std::span<double> trace, std::span<const double> grad, double gamma, double lambda);

/// Learning-rule settings, named as in experiment configs.
struct Hyperparameters {
  double actor_lr = 0.003844152898051233;
  double actor_beta1 = 0.9;
  double actor_beta2 = 0.9914815877866358;
  double lambda_actor = 0.8206776332879618;
  double critic_lr = 0.00018759145359217475;
  double critic_beta1 = 0.0;
  double critic_beta2 = 0.9999975597793732;
  double lambda_critic = 0.0;
  double gamma = 0.9679813850692468;
  double adam_eps = 1e-8;
  std::size_t batch_actor = 128;
  std::size_t batch_critic = 32;

  AdamOptions actor_adam() const { return {actor_lr, actor_beta1, actor_beta2, adam_eps}; }
  AdamOptions critic_adam() const { return {critic_lr, critic_beta1, critic_beta2, adam_eps}; }
};

/// Mutable actor-critic learning state of one trial. Adam steps are taken
/// once `batch_actor` (resp. `batch_critic`) per-step gradients have been
/// accumulated; the applied gradient is their mean.
struct ActorCriticState {
  TraceState traces;
  AdamState actor_adam;
  AdamState critic_adam;
  Vector actor_accum;
  Vector critic_accum;
  std::size_t actor_pending = 0;
  std::size_t critic_pending = 0;
  Vector theta_nu;  // expansion of the current unique parameters

  ActorCriticState(const Network& network, const CriticNet& critic, const Hyperparameters& hp);
};

struct Transition {
  std::span<const double> observation;       // normalized
  const AtomicStepRecord& record;
  double reward = 0.0;
  std::span<const double> next_observation;  // normalized; unused when done
  bool done = false;
};

/// Per-step execution-gated score vector for the actor, in unique space.
Vector actor_step_gradient(const NetworkTopology& topology, std::span<const double> theta_nu,
                           const AtomicStepRecord& record);

/// One episodic actor-critic update with eligibility traces, without the
/// gamma^t factor on the actor. Returns the TD error.
double actor_critic_step(Network& network, CriticNet& critic, const Transition& transition,
                         ActorCriticState& state, const Hyperparameters& hp);

}  // namespace coagent
