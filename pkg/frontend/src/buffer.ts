/**
 * Rollout storage and generalized advantage estimation.
 *
 * Advantage math runs in plain float64 JS arrays; with lambda = 1 and a
 * terminated trajectory it reduces exactly to discounted Monte-Carlo
 * returns.
 */

export interface GaeResult {
  advantages: Float64Array;
  returns: Float64Array;
}

/**
 * Per-env GAE over one rollout.
 *
 * `dones[t]` marks that the episode ended ON step t (no bootstrap across
 * it); `lastValue` bootstraps the value after the final step when the
 * episode is still running.
 */
export function gae(
  rewards: ArrayLike<number>,
  values: ArrayLike<number>,
  dones: ArrayLike<boolean | number>,
  lastValue: number,
  gamma: number,
  lambda: number,
): GaeResult {
  const t = rewards.length;
  if (values.length !== t || dones.length !== t) {
    throw new Error("rewards/values/dones length mismatch");
  }
  const advantages = new Float64Array(t);
  let adv = 0;
  for (let i = t - 1; i >= 0; i--) {
    const cont = dones[i] ? 0 : 1;
    const nextValue = i === t - 1 ? lastValue : (values[i + 1] as number);
    const delta = (rewards[i] as number) + gamma * cont * nextValue - (values[i] as number);
    adv = delta + gamma * lambda * cont * adv;
    advantages[i] = adv;
  }
  const returns = new Float64Array(t);
  for (let i = 0; i < t; i++) returns[i] = advantages[i] + (values[i] as number);
  return { advantages, returns };
}

export interface RolloutStep {
  obs: Float32Array; // fused [H*W*6]
  mask: number; // 0 when this step starts a new episode (reset hidden state)
  action: number;
  logp: number;
  value: number;
  reward: number;
  done: boolean;
}

export class RolloutBuffer {
  steps: RolloutStep[][];

  constructor(readonly nEnvs: number) {
    this.steps = Array.from({ length: nEnvs }, () => []);
  }

  add(env: number, step: RolloutStep): void {
    this.steps[env].push(step);
  }

  clear(): void {
    this.steps = Array.from({ length: this.nEnvs }, () => []);
  }

  /** GAE per env, then flattened in env-major order to match training. */
  advantages(
    lastValues: number[],
    gamma: number,
    lambda: number,
  ): { advantages: Float64Array; returns: Float64Array } {
    const out: number[] = [];
    const rets: number[] = [];
    for (let e = 0; e < this.nEnvs; e++) {
      const traj = this.steps[e];
      const { advantages, returns } = gae(
        traj.map((s) => s.reward),
        traj.map((s) => s.value),
        traj.map((s) => s.done),
        lastValues[e],
        gamma,
        lambda,
      );
      out.push(...advantages);
      rets.push(...returns);
    }
    return { advantages: Float64Array.from(out), returns: Float64Array.from(rets) };
  }
}
