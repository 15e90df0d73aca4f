use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::eval::evaluate;
use super::metrics::{final_window, mean_std, MetricsRow, MetricsWriter};
use crate::agent::{Agent, ReplayBuffer, Transition};
use crate::error::Result;
use crate::pomdp::sliding_window_update;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";

pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    /// In-episode step of each episode's first stored transition.
    pub first_store: Vec<usize>,
    pub final_window_mean: f64,
    pub final_window_std: f64,
}

#[derive(Default)]
struct Since {
    train_returns: Vec<f64>,
    actor: Vec<f64>,
    critic: Vec<f64>,
    q: Vec<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn uniform(rng: &mut ChaCha8Rng, dim: usize, bound: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Runs one seeded training job and writes `config.toml`, `metrics.csv` and
/// `checkpoint.bin` into `config.out_dir`.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join(CONFIG_FILE), config.echo()?)?;
    let mut writer = MetricsWriter::create(&config.out_dir.join(METRICS_FILE))?;

    let mut env = config.make_env()?;
    let mut eval_env = config.make_env()?;
    let spec = env.spec().clone();
    let (obs_dim, act_dim, bound) = (spec.obs_dim(), spec.action_dim, spec.action_bound);

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut agent = Agent::new(config.agent.clone(), obs_dim, act_dim, bound, master.random())?;
    let mut episode_seeds = ChaCha8Rng::seed_from_u64(master.random());
    let mut action_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut replay_rng = ChaCha8Rng::seed_from_u64(master.random());
    let eval_seed: u64 = master.random();

    let n = agent.dims.history_len;
    let batch_size = config.agent.batch_size;
    let mut buffer = ReplayBuffer::new(config.agent.replay_capacity, n + 1, obs_dim, act_dim);
    let clock = Instant::now();

    let mut rows = Vec::new();
    let mut first_store = Vec::new();
    let mut since = Since::default();
    let mut step = 0usize;
    let mut episode = 0usize;

    let mut checkpoint = |step: usize, episode: usize, agent: &Agent, since: &mut Since| -> Result<()> {
        if step % config.eval_every != 0 && step != config.total_steps {
            return Ok(());
        }
        let stats = evaluate(agent, &mut eval_env, config.eval_episodes, eval_seed)?;
        let row = MetricsRow {
            step,
            episode,
            episodic_return: stats.mean,
            eval_std: stats.std,
            train_return: mean(&since.train_returns),
            actor_loss: mean(&since.actor),
            critic_loss: mean(&since.critic),
            mean_q: mean(&since.q),
            wall_ms: if config.log_wall_time { clock.elapsed().as_millis() as u64 } else { 0 },
            seed: config.seed,
        };
        writer.write(&row)?;
        rows.push(row);
        *since = Since::default();
        Ok(())
    };

    while step < config.total_steps {
        episode += 1;
        let mut obs = vec![env.reset(episode_seeds.random())];
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ep_return = 0.0;
        let mut t = 0usize;
        let mut stored_first = false;
        loop {
            let filling = obs.len() < n + 1;
            let a = if filling || step < config.warmup_steps {
                uniform(&mut action_rng, act_dim, bound)
            } else {
                let mut a_bar = vec![0.0; act_dim];
                a_bar.extend(acts.concat());
                agent.select_action(&obs.concat(), &a_bar, true)?
            };
            let r = env.step(&a)?;
            step += 1;
            ep_return += r.reward;
            let done = r.done();
            if filling {
                obs.insert(0, r.observation);
                acts.insert(0, a);
            } else {
                if !stored_first {
                    first_store.push(t);
                    stored_first = true;
                }
                let mut a_bar = a.clone();
                a_bar.extend(acts.concat());
                let next = sliding_window_update(&obs, r.observation);
                buffer.push(Transition {
                    s_bar: obs.concat(),
                    a_bar,
                    reward: r.reward,
                    s_bar_next: next.concat(),
                    terminated: r.terminated,
                })?;
                obs = next;
                if n > 0 {
                    acts = sliding_window_update(&acts, a);
                }
                if step >= config.warmup_steps && buffer.len() >= batch_size {
                    let batch = buffer.sample(batch_size, &mut replay_rng)?;
                    let s = agent.update(&batch)?;
                    since.critic.push(s.critic_loss);
                    since.q.push(s.mean_q);
                    if let Some(l) = s.actor_loss {
                        since.actor.push(l);
                    }
                }
            }
            t += 1;
            if done {
                since.train_returns.push(ep_return);
            }
            checkpoint(step, episode, &agent, &mut since)?;
            if done || step >= config.total_steps {
                break;
            }
        }
    }

    agent.save(&config.out_dir.join(CHECKPOINT_FILE))?;
    let (final_window_mean, final_window_std) = mean_std(&final_window(&rows, config.total_steps));
    Ok(TrainOutcome {
        rows,
        agent,
        buffer,
        first_store,
        final_window_mean,
        final_window_std,
    })
}
