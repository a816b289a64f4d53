/**
 * Clipped-objective policy optimization over recurrent rollouts, with a
 * hand-rolled Adam so the learning rate can decay linearly without
 * disturbing the moment estimates.
 */

import * as tf from "@tensorflow/tfjs";

import { RolloutBuffer } from "./buffer";
import { PolicyModel } from "./model";

export interface TrainingConfig {
  learningRate: number; // 0.0025
  rolloutSteps: number; // 128
  ppoEpochs: number; // 4
  miniBatches: number; // 1
  valueCoef: number; // 0.5
  entropyCoef: number; // 0.01
  gamma: number; // 0.99
  gaeLambda: number; // 0.95
  clip: number; // 0.2
  linearDecay: boolean; // decay lr and clip to zero over nUpdates
  nEnvs: number;
  nUpdates: number;
  nUpdateValidate: number; // validation/checkpoint interval
  nDifficulty: number; // scheduler interval
  seed: number;
}

export const DEFAULT_TRAINING: TrainingConfig = {
  learningRate: 0.0025,
  rolloutSteps: 128,
  ppoEpochs: 4,
  miniBatches: 1,
  valueCoef: 0.5,
  entropyCoef: 0.01,
  gamma: 0.99,
  gaeLambda: 0.95,
  clip: 0.2,
  linearDecay: true,
  nEnvs: 16,
  nUpdates: 30_000,
  nUpdateValidate: 1_000,
  nDifficulty: 10_000,
  seed: 0,
};

export class Adam {
  private m = new Map<string, tf.Variable>();
  private v = new Map<string, tf.Variable>();
  private t = 0;

  constructor(
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {}

  apply(grads: Record<string, tf.Tensor>, vars: Record<string, tf.Variable>, lr: number): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const [name, grad] of Object.entries(grads)) {
      if (!this.m.has(name)) {
        this.m.set(name, tf.variable(tf.zerosLike(grad), false));
        this.v.set(name, tf.variable(tf.zerosLike(grad), false));
      }
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      tf.tidy(() => {
        m.assign(m.mul(this.beta1).add(grad.mul(1 - this.beta1)));
        v.assign(v.mul(this.beta2).add(grad.square().mul(1 - this.beta2)));
        const update = m.div(c1).div(v.div(c2).sqrt().add(this.eps)).mul(lr);
        vars[name].assign(vars[name].sub(update));
      });
    }
  }

  dispose(): void {
    for (const t of this.m.values()) t.dispose();
    for (const t of this.v.values()) t.dispose();
  }
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  lr: number;
  clip: number;
}

function logSoftmax(logits: tf.Tensor2D): tf.Tensor2D {
  return tf.sub(logits, tf.logSumExp(logits, 1, true)) as tf.Tensor2D;
}

/** Stack per-env observations and masks for step t into typed arrays. */
function stackStep(
  buffer: RolloutBuffer,
  t: number,
): { obs: Float32Array; masks: Float32Array } {
  const size = buffer.steps[0][t].obs.length;
  const obs = new Float32Array(buffer.nEnvs * size);
  const masks = new Float32Array(buffer.nEnvs);
  buffer.steps.forEach((traj, e) => {
    obs.set(traj[t].obs, e * size);
    masks[e] = traj[t].mask;
  });
  return { obs, masks };
}

/**
 * Recompute the forward pass along a rollout under current parameters,
 * threading the GRU state (masked at episode starts), and return per-step
 * log-probs, entropy, and values flattened env-major.
 */
function evaluateRollout(
  model: PolicyModel,
  buffer: RolloutBuffer,
  actions: tf.Tensor1D,
  stacks: Array<{ obs: Float32Array; masks: Float32Array }>,
): { logp: tf.Tensor1D; entropy: tf.Scalar; values: tf.Tensor1D } {
  const { obsHeight, obsWidth, channels } = model.cfg;
  const nEnvs = buffer.nEnvs;
  const steps = buffer.steps[0].length;
  const logits: tf.Tensor2D[] = [];
  const values: tf.Tensor1D[] = [];
  let h = model.zeroState(nEnvs);
  for (let t = 0; t < steps; t++) {
    const masks = tf.tensor2d(stacks[t].masks, [nEnvs, 1]);
    const obs = tf.tensor4d(stacks[t].obs, [nEnvs, obsHeight, obsWidth, channels]);
    const out = model.forward(obs, h.mul(masks) as tf.Tensor2D);
    logits.push(out.logits);
    values.push(out.value);
    h = out.h;
  }
  // [T, E, A] -> env-major flatten [E*T, A]
  const stackedLogits = tf.stack(logits).transpose([1, 0, 2]);
  const flatLogits = stackedLogits.reshape([nEnvs * steps, model.cfg.actions]) as tf.Tensor2D;
  const flatValues = tf
    .stack(values)
    .transpose([1, 0])
    .reshape([nEnvs * steps]) as tf.Tensor1D;
  const logProbs = logSoftmax(flatLogits);
  const probs = logProbs.exp();
  const entropy = probs.mul(logProbs).sum(1).neg().mean() as tf.Scalar;
  const onehot = tf.oneHot(actions, model.cfg.actions);
  const logp = logProbs.mul(onehot).sum(1) as tf.Tensor1D;
  return { logp, entropy, values: flatValues };
}

/** One full update: ppoEpochs passes over the rollout (one minibatch each). */
export function ppoUpdate(
  model: PolicyModel,
  buffer: RolloutBuffer,
  lastValues: number[],
  cfg: TrainingConfig,
  optimizer: Adam,
  updateIndex: number,
): UpdateStats {
  const frac = cfg.linearDecay ? Math.max(0, 1 - updateIndex / cfg.nUpdates) : 1;
  const lr = cfg.learningRate * frac;
  const clip = cfg.clip * frac;

  const { advantages, returns } = buffer.advantages(lastValues, cfg.gamma, cfg.gaeLambda);
  const mean = advantages.reduce((a, b) => a + b, 0) / advantages.length;
  const std =
    Math.sqrt(
      advantages.reduce((a, b) => a + (b - mean) * (b - mean), 0) / advantages.length,
    ) || 1;
  const normAdv = Float32Array.from(advantages, (a) => (a - mean) / (std + 1e-8));

  const flat = buffer.steps.flat();
  const actions = tf.tensor1d(flat.map((s) => s.action), "int32");
  const oldLogp = tf.tensor1d(flat.map((s) => s.logp));
  const advT = tf.tensor1d(normAdv);
  const retT = tf.tensor1d(Float32Array.from(returns));

  const steps = buffer.steps[0].length;
  const stacks = Array.from({ length: steps }, (_, t) => stackStep(buffer, t));

  let stats: UpdateStats = { policyLoss: 0, valueLoss: 0, entropy: 0, lr, clip };
  for (let epoch = 0; epoch < cfg.ppoEpochs; epoch++) {
    const report: number[] = [];
    const { grads } = tf.variableGrads(() => {
      const { logp, entropy, values } = evaluateRollout(
        model, buffer, actions as tf.Tensor1D, stacks,
      );
      const ratio = logp.sub(oldLogp).exp();
      const surr1 = ratio.mul(advT);
      const surr2 = ratio.clipByValue(1 - clip, 1 + clip).mul(advT);
      const policyLoss = tf.minimum(surr1, surr2).mean().neg();
      const valueLoss = values.sub(retT).square().mean().mul(0.5);
      const loss = policyLoss
        .add(valueLoss.mul(cfg.valueCoef))
        .sub(entropy.mul(cfg.entropyCoef));
      report.push(
        policyLoss.dataSync()[0],
        valueLoss.dataSync()[0],
        entropy.dataSync()[0],
      );
      return loss as tf.Scalar;
    }, Object.values(model.vars));
    const byName: Record<string, tf.Tensor> = {};
    for (const [tfName, grad] of Object.entries(grads)) {
      byName[model.logicalName(tfName)] = grad;
    }
    optimizer.apply(byName, model.vars, lr);
    Object.values(grads).forEach((g) => g.dispose());
    stats = { policyLoss: report[0], valueLoss: report[1], entropy: report[2], lr, clip };
  }
  actions.dispose();
  oldLogp.dispose();
  advT.dispose();
  retT.dispose();
  return stats;
}
