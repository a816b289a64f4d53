/**
 * Rollout collection against the environment server.
 *
 * The GRU state is zeroed at every rollout boundary and at episode starts
 * (via masks), and the update recomputes the forward pass the same way, so
 * the first PPO epoch sees probability ratios of exactly one.
 */

import * as tf from "@tensorflow/tfjs";

import { RolloutBuffer } from "./buffer";
import { PolicyModel, fuseObservation } from "./model";
import { ACTIONS, EnvClient, StepReply } from "./protocol";
import { Rng } from "./rng";

export interface EnvSlot {
  obs: Float32Array;
  mask: number; // 0 right after a reset
  episodeReturn: number;
}

export class Collector {
  slots: EnvSlot[] = [];
  finishedReturns: number[] = [];

  constructor(
    readonly model: PolicyModel,
    readonly client: EnvClient,
    readonly nEnvs: number,
    readonly rng: Rng,
  ) {}

  private fuse(reply: StepReply): Float32Array {
    const obs = reply.obs!;
    return fuseObservation(obs.target, obs.current, obs.width, obs.height);
  }

  async start(): Promise<void> {
    this.slots = [];
    for (let e = 0; e < this.nEnvs; e++) {
      const reply = await this.client.reset(e);
      if (!reply.ok) throw new Error(`reset failed: ${reply.error}`);
      this.slots.push({ obs: this.fuse(reply), mask: 0, episodeReturn: 0 });
    }
  }

  private batchObs(): tf.Tensor4D {
    const { obsHeight, obsWidth, channels } = this.model.cfg;
    const size = obsHeight * obsWidth * channels;
    const data = new Float32Array(this.nEnvs * size);
    this.slots.forEach((slot, e) => data.set(slot.obs, e * size));
    return tf.tensor4d(data, [this.nEnvs, obsHeight, obsWidth, channels]);
  }

  /** Collect one rollout; returns the buffer and bootstrap values. */
  async collect(
    steps: number,
    greedy = false,
  ): Promise<{ buffer: RolloutBuffer; lastValues: number[] }> {
    const buffer = new RolloutBuffer(this.nEnvs);
    let h = this.model.zeroState(this.nEnvs);
    for (let t = 0; t < steps; t++) {
      const masks = tf.tensor2d(this.slots.map((s) => [s.mask]), [this.nEnvs, 1]);
      const obs = this.batchObs();
      const { logits, value, h: h2 } = this.model.forward(
        obs, h.mul(masks) as tf.Tensor2D,
      );
      const probs = (await logits.softmax().data()) as Float32Array;
      const logProbs = (await logits.logSoftmax().data()) as Float32Array;
      const values = (await value.data()) as Float32Array;
      obs.dispose();
      masks.dispose();
      h.dispose();
      h = h2;
      logits.dispose();
      value.dispose();

      const pending = new Map<number, string>();
      const chosen: number[] = [];
      for (let e = 0; e < this.nEnvs; e++) {
        const row = probs.subarray(e * ACTIONS.length, (e + 1) * ACTIONS.length);
        const a = greedy ? row.indexOf(Math.max(...row)) : this.rng.categorical(row);
        chosen.push(a);
        pending.set(e, ACTIONS[a]);
      }
      const replies = await this.client.stepAll(pending);
      for (let e = 0; e < this.nEnvs; e++) {
        const reply = replies.get(e)!;
        if (!reply.ok) throw new Error(`step failed: ${reply.error}`);
        const slot = this.slots[e];
        buffer.add(e, {
          obs: slot.obs,
          mask: slot.mask,
          action: chosen[e],
          logp: logProbs[e * ACTIONS.length + chosen[e]],
          value: values[e],
          reward: reply.reward!,
          done: reply.done!,
        });
        slot.episodeReturn += reply.reward!;
        if (reply.done) {
          this.finishedReturns.push(slot.episodeReturn);
          const fresh = await this.client.reset(e);
          if (!fresh.ok) throw new Error(`reset failed: ${fresh.error}`);
          this.slots[e] = { obs: this.fuse(fresh), mask: 0, episodeReturn: 0 };
        } else {
          slot.obs = this.fuse(reply);
          slot.mask = 1;
        }
      }
    }
    const masks = tf.tensor2d(this.slots.map((s) => [s.mask]), [this.nEnvs, 1]);
    const obs = this.batchObs();
    const { value, h: hLast, logits } = this.model.forward(obs, h.mul(masks) as tf.Tensor2D);
    const lastValues = Array.from((await value.data()) as Float32Array);
    [masks, obs, h, hLast, value, logits].forEach((x) => x.dispose());
    return { buffer, lastValues };
  }

  /** Mean return of episodes finished since the last call. */
  drainReturns(): number[] {
    const out = this.finishedReturns;
    this.finishedReturns = [];
    return out;
  }
}
