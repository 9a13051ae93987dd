#pragma once

// Clipped-surrogate PPO with separate policy and value networks, plus the
// training and width-estimation loops of the fractional-bit search.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ahpq/fpq_env.hpp"
#include "ahpq/mlp.hpp"

namespace ahpq::rl {

inline const std::vector<int> kHiddenLayers = {64, 128, 256, 256, 128, 64};

struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  std::vector<double> log_probs;  // under the behaviour policy
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<bool> episode_end;  // true on the last step of an episode

  std::size_t size() const { return actions.size(); }
  void clear();
  /// Throws std::invalid_argument when the sequences are misaligned.
  void validate() const;
};

struct TrainConfig {
  int max_episodes = 3000;
  int max_timestep = 20;  // steps per episode; the env's own limit also ends an episode
  int update_every = 10;  // episodes per PPO update
  int test_steps = 200;
  double gamma = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;  // 0: full batch
  double lr = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  nn::Activation activation = nn::Activation::kTanh;
  std::vector<int> hidden = kHiddenLayers;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Policy (softmax head over actions) and value (scalar head) networks with
/// their optimizers.
struct ActorCritic {
  nn::Mlp policy;
  nn::Mlp value;
  nn::Adam policy_opt;
  nn::Adam value_opt;

  static ActorCritic create(int state_dim, int actions, const TrainConfig& cfg, sim::Rng& rng);
  std::vector<double> probabilities(const std::vector<double>& state) const;
  double state_value(const std::vector<double>& state) const;
};

/// Discounted returns, reset at episode boundaries.
std::vector<double> discounted_returns(const Trajectory& t, double gamma);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Advantages are returns minus the behaviour value estimates. Throws
/// std::runtime_error if a loss turns non-finite.
UpdateStats ppo_update(ActorCritic& ac, const Trajectory& batch, const TrainConfig& cfg,
                       sim::Rng& rng);

/// Gradient of the clipped surrogate plus entropy bonus (a loss to
/// minimise) with respect to the policy logits, one column per sample.
Eigen::MatrixXd surrogate_logit_gradient(const Eigen::MatrixXd& logits,
                                         const std::vector<int>& actions,
                                         const std::vector<double>& old_log_probs,
                                         const std::vector<double>& advantages, double clip,
                                         double entropy_coef);

int sample_action(const std::vector<double>& probs, sim::Rng& rng);

struct TrainResult {
  ActorCritic model;
  std::vector<double> reward_history;  // mean step reward per update
};

TrainResult train(Environment& env, const TrainConfig& cfg);

/// update_index,mean_reward
void write_reward_history(const std::string& path, const std::vector<double>& history);

/// For each k, start at q_max, take test_steps sampled policy actions on q_k
/// and average the visited widths (rounded half away from zero).
fpq::Widths estimate_bitwidths(const nn::Mlp& policy, const fpq::EnvConfig& env_cfg,
                               int test_steps, std::uint64_t seed);

/// Single-state bandit: `arms` actions, reward 1 for `good_arm` and 0
/// otherwise; episodes last `length` steps.
class BanditEnv final : public Environment {
 public:
  BanditEnv(int arms, int good_arm, int state_dim = 32, int length = 20);
  int state_dim() const override { return state_dim_; }
  int action_count() const override { return arms_; }
  std::vector<double> reset() override;
  Step step(int action) override;

 private:
  int arms_;
  int good_arm_;
  int state_dim_;
  int length_;
  int t_ = 0;
};

}  // namespace ahpq::rl
