#include "ahpq/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ahpq::rl {

void Trajectory::clear() {
  states.clear();
  actions.clear();
  log_probs.clear();
  rewards.clear();
  values.clear();
  episode_end.clear();
}

void Trajectory::validate() const {
  const std::size_t n = actions.size();
  if (states.size() != n || log_probs.size() != n || rewards.size() != n || values.size() != n ||
      episode_end.size() != n) {
    throw std::invalid_argument("trajectory sequences have different lengths");
  }
  for (const double lp : log_probs) {
    if (lp > 0.0) throw std::invalid_argument("log-probability > 0 in trajectory");
  }
}

void TrainConfig::validate() const {
  if (max_episodes < 1 || max_timestep < 1 || update_every < 1 || test_steps < 1 || epochs < 1) {
    throw std::invalid_argument("episode, step, update and epoch counts must be positive");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("clip must be in (0, 1)");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (entropy_coef < 0.0 || value_coef < 0.0 || minibatch < 0 || max_grad_norm < 0.0) {
    throw std::invalid_argument("coefficients must be >= 0");
  }
}

ActorCritic ActorCritic::create(int state_dim, int actions, const TrainConfig& cfg,
                                sim::Rng& rng) {
  std::vector<int> ps = {state_dim};
  ps.insert(ps.end(), cfg.hidden.begin(), cfg.hidden.end());
  std::vector<int> vs = ps;
  ps.push_back(actions);
  vs.push_back(1);
  ActorCritic ac;
  // A small policy head starts the agent close to uniform.
  ac.policy = nn::Mlp(ps, cfg.activation, rng, 0.01);
  ac.value = nn::Mlp(vs, cfg.activation, rng, 1.0);
  const nn::AdamConfig adam{.lr = cfg.lr, .max_grad_norm = cfg.max_grad_norm};
  ac.policy_opt = nn::Adam(ac.policy, adam);
  ac.value_opt = nn::Adam(ac.value, adam);
  return ac;
}

std::vector<double> ActorCritic::probabilities(const std::vector<double>& state) const {
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(state.data(), state.size());
  const Eigen::MatrixXd p = nn::softmax(policy.forward(Eigen::MatrixXd(x)));
  return {p.data(), p.data() + p.size()};
}

double ActorCritic::state_value(const std::vector<double>& state) const {
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(state.data(), state.size());
  return value.forward(x)(0);
}

std::vector<double> discounted_returns(const Trajectory& t, double gamma) {
  std::vector<double> out(t.size());
  double g = 0.0;
  for (std::size_t i = t.size(); i-- > 0;) {
    if (t.episode_end[i]) g = 0.0;
    g = t.rewards[i] + gamma * g;
    out[i] = g;
  }
  return out;
}

Eigen::MatrixXd surrogate_logit_gradient(const Eigen::MatrixXd& logits,
                                         const std::vector<int>& actions,
                                         const std::vector<double>& old_log_probs,
                                         const std::vector<double>& advantages, double clip,
                                         double entropy_coef) {
  const Eigen::MatrixXd p = nn::softmax(logits);
  const auto n = static_cast<double>(logits.cols());
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const int a = actions[c];
    const double adv = advantages[c];
    const double ratio = std::exp(std::log(p(a, c)) - old_log_probs[c]);
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    // d/dlogits of the surrogate; zero when the clipped branch is the min.
    if (ratio * adv <= clipped * adv) {
      Eigen::VectorXd d = -p.col(c);
      d(a) += 1.0;
      grad.col(c) -= adv * ratio * d;
    }
    if (entropy_coef > 0.0) {
      const Eigen::ArrayXd logp = p.col(c).array().max(1e-300).log();
      const double h = -(p.col(c).array() * logp).sum();
      const Eigen::VectorXd dh = -(p.col(c).array() * (logp + h)).matrix();
      grad.col(c) -= entropy_coef * dh;
    }
  }
  return grad / n;
}

UpdateStats ppo_update(ActorCritic& ac, const Trajectory& batch, const TrainConfig& cfg,
                       sim::Rng& rng) {
  batch.validate();
  if (batch.size() == 0) throw std::invalid_argument("empty PPO batch");
  const std::size_t n = batch.size();
  const std::vector<double> returns = discounted_returns(batch, cfg.gamma);
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = returns[i] - batch.values[i];

  const int dim = static_cast<int>(batch.states.front().size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = cfg.minibatch == 0 ? n : static_cast<std::size_t>(cfg.minibatch);

  UpdateStats stats;
  int passes = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const auto m = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(dim, m);
      std::vector<int> acts(m);
      std::vector<double> old_lp(m), a_mb(m);
      Eigen::RowVectorXd ret(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const std::size_t i = order[start + j];
        x.col(j) = Eigen::Map<const Eigen::VectorXd>(batch.states[i].data(), dim);
        acts[j] = batch.actions[i];
        old_lp[j] = batch.log_probs[i];
        a_mb[j] = adv[i];
        ret(j) = returns[i];
      }

      nn::Mlp::Tape ptape;
      const Eigen::MatrixXd logits = ac.policy.forward(x, ptape);
      const Eigen::MatrixXd p = nn::softmax(logits);
      double surr = 0.0, ent = 0.0, clipped = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double ratio = std::exp(std::log(p(acts[j], j)) - old_lp[j]);
        const double rc = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        surr += std::min(ratio * a_mb[j], rc * a_mb[j]);
        if (rc != ratio) clipped += 1.0;
        ent -= (p.col(j).array() * p.col(j).array().max(1e-300).log()).sum();
      }
      const double policy_loss = -(surr + cfg.entropy_coef * ent) / static_cast<double>(m);
      const Eigen::MatrixXd d_logits =
          surrogate_logit_gradient(logits, acts, old_lp, a_mb, cfg.clip, cfg.entropy_coef);

      nn::Mlp::Tape vtape;
      const Eigen::MatrixXd v = ac.value.forward(x, vtape);
      const Eigen::RowVectorXd err = v.row(0) - ret;
      const double value_loss = cfg.value_coef * err.squaredNorm() / static_cast<double>(m);
      const Eigen::MatrixXd d_v = (2.0 * cfg.value_coef / static_cast<double>(m)) * err;

      if (!std::isfinite(policy_loss) || !std::isfinite(value_loss)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss (policy " << policy_loss << ", value " << value_loss
            << ", epoch " << epoch << ", minibatch at " << start << ")";
        throw std::runtime_error(msg.str());
      }
      ac.policy_opt.step(ac.policy, ac.policy.backward(ptape, d_logits));
      ac.value_opt.step(ac.value, ac.value.backward(vtape, d_v));

      stats.policy_loss += policy_loss;
      stats.value_loss += value_loss;
      stats.entropy += ent / static_cast<double>(m);
      stats.clip_fraction += clipped / static_cast<double>(m);
      ++passes;
    }
  }
  stats.policy_loss /= passes;
  stats.value_loss /= passes;
  stats.entropy /= passes;
  stats.clip_fraction /= passes;
  return stats;
}

int sample_action(const std::vector<double>& probs, sim::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  for (std::size_t a = 0; a < probs.size(); ++a) {
    r -= probs[a];
    if (r < 0.0) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

TrainResult train(Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  sim::Rng rng = sim::stream_for(cfg.seed, 7, 0);
  TrainResult result;
  result.model = ActorCritic::create(env.state_dim(), env.action_count(), cfg, rng);
  ActorCritic& ac = result.model;

  Trajectory batch;
  for (int episode = 1; episode <= cfg.max_episodes; ++episode) {
    std::vector<double> state = env.reset();
    for (int t = 0; t < cfg.max_timestep; ++t) {
      const std::vector<double> probs = ac.probabilities(state);
      const int a = sample_action(probs, rng);
      const Environment::Step s = env.step(a);
      const bool last = s.done || t + 1 == cfg.max_timestep;
      batch.states.push_back(state);
      batch.actions.push_back(a);
      batch.log_probs.push_back(std::log(probs[a]));
      batch.rewards.push_back(s.reward);
      batch.values.push_back(ac.state_value(state));
      batch.episode_end.push_back(last);
      state = s.state;
      if (last) break;
    }
    if (episode % cfg.update_every == 0 || episode == cfg.max_episodes) {
      const double mean = std::accumulate(batch.rewards.begin(), batch.rewards.end(), 0.0) /
                          static_cast<double>(batch.size());
      result.reward_history.push_back(mean);
      ppo_update(ac, batch, cfg, rng);
      batch.clear();
    }
  }
  if (!ac.policy.finite() || !ac.value.finite()) {
    throw std::runtime_error("training produced non-finite parameters");
  }
  return result;
}

void write_reward_history(const std::string& path, const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "update_index,mean_reward\n";
  out.precision(10);
  for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << ',' << history[i] << '\n';
}

fpq::Widths estimate_bitwidths(const nn::Mlp& policy, const fpq::EnvConfig& env_cfg,
                               int test_steps, std::uint64_t seed) {
  if (test_steps < 1) throw std::invalid_argument("test_steps must be >= 1");
  sim::Rng rng = sim::stream_for(seed, 8, 0);
  fpq::Widths out{};
  for (int k = 1; k <= fpq::kNumAll; ++k) {
    int q = env_cfg.q_max;
    double sum = 0.0;
    for (int t = 0; t < test_steps; ++t) {
      const std::vector<double> s = fpq::encode_state(k, q, env_cfg);
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
      const Eigen::MatrixXd p = nn::softmax(policy.forward(Eigen::MatrixXd(x)));
      const std::vector<double> probs(p.data(), p.data() + p.size());
      q = fpq::apply_action(q, sample_action(probs, rng) - env_cfg.l_a, env_cfg);
      sum += q;
    }
    const long mean = std::lround(sum / test_steps);
    out[k - 1] = static_cast<int>(std::clamp<long>(mean, 0, env_cfg.q_max));
  }
  return out;
}

BanditEnv::BanditEnv(int arms, int good_arm, int state_dim, int length)
    : arms_(arms), good_arm_(good_arm), state_dim_(state_dim), length_(length) {
  if (arms < 2 || good_arm < 0 || good_arm >= arms || state_dim < 1 || length < 1) {
    throw std::invalid_argument("bad bandit configuration");
  }
}

std::vector<double> BanditEnv::reset() {
  t_ = 0;
  std::vector<double> s(static_cast<std::size_t>(state_dim_), 0.0);
  s[0] = 1.0;
  return s;
}

Environment::Step BanditEnv::step(int action) {
  if (t_ >= length_) throw std::logic_error("step on a finished episode; call reset()");
  ++t_;
  std::vector<double> s(static_cast<std::size_t>(state_dim_), 0.0);
  s[0] = 1.0;
  return {std::move(s), action == good_arm_ ? 1.0 : 0.0, t_ >= length_};
}

}  // namespace ahpq::rl
