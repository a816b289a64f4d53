/**
 * Recurrent actor-critic: conv encoder -> 512 feature -> GRU (512 hidden)
 * -> 5-way policy head + scalar value head.
 *
 * Built from raw ops with named variables so checkpoints are plain
 * name -> array maps and every initializer is explicitly seeded.
 */

import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  obsWidth: number;
  obsHeight: number;
  channels: number; // 6: target and current views fused channelwise
  feature: number; // 512
  actions: number; // 5
}

export const DEFAULT_MODEL: Omit<ModelConfig, "obsWidth" | "obsHeight"> = {
  channels: 6,
  feature: 512,
  actions: 5,
};

interface ConvSpec {
  kernel: number;
  stride: number;
  filters: number;
}

// three conv layers then one fully-connected layer
const CONV_STACK: ConvSpec[] = [
  { kernel: 8, stride: 4, filters: 32 },
  { kernel: 4, stride: 2, filters: 64 },
  { kernel: 3, stride: 1, filters: 64 },
];

function convOut(size: number): number {
  let s = size;
  for (const { kernel, stride } of CONV_STACK) {
    s = Math.floor((s - kernel) / stride) + 1;
    if (s < 1) throw new Error(`observation too small for the encoder (${size})`);
  }
  return s;
}

let instanceCounter = 0;

export class PolicyModel {
  readonly vars: Record<string, tf.Variable> = {};
  readonly flatSize: number;
  private readonly scope = `policy${instanceCounter++}`;

  constructor(readonly cfg: ModelConfig, seed = 0) {
    const { obsWidth, obsHeight, channels, feature, actions } = cfg;
    this.flatSize = convOut(obsHeight) * convOut(obsWidth) * CONV_STACK[2].filters;
    let inCh = channels;
    CONV_STACK.forEach((spec, i) => {
      this.add(`conv${i}/w`, [spec.kernel, spec.kernel, inCh, spec.filters], seed + i);
      this.add(`conv${i}/b`, [spec.filters], seed + i, true);
      inCh = spec.filters;
    });
    this.add("fc/w", [this.flatSize, feature], seed + 10);
    this.add("fc/b", [feature], seed + 10, true);
    for (const gate of ["z", "r", "c"]) {
      this.add(`gru/w${gate}`, [feature, feature], seed + 20);
      this.add(`gru/u${gate}`, [feature, feature], seed + 21);
      this.add(`gru/b${gate}`, [feature], seed + 20, true);
    }
    this.add("actor/w", [feature, actions], seed + 30, false, 0.01);
    this.add("actor/b", [actions], seed + 30, true);
    this.add("critic/w", [feature, 1], seed + 31);
    this.add("critic/b", [1], seed + 31, true);
  }

  private add(
    name: string,
    shape: number[],
    seed: number,
    zeros = false,
    gain = 1.0,
  ): void {
    let init: tf.Tensor;
    if (zeros) {
      init = tf.zeros(shape);
    } else {
      const t = tf.initializers
        .glorotUniform({ seed })
        .apply(shape, "float32") as tf.Tensor;
      init = gain === 1.0 ? t : t.mul(gain);
    }
    // engine-unique tf name; the logical name keys checkpoints and grads
    this.vars[name] = tf.variable(init, true, `${this.scope}/${name}`);
  }

  /** Map a tf variable name back to its logical name. */
  logicalName(tfName: string): string {
    return tfName.startsWith(`${this.scope}/`)
      ? tfName.slice(this.scope.length + 1)
      : tfName;
  }

  trainableCount(): number {
    return Object.values(this.vars).reduce((n, v) => n + v.size, 0);
  }

  /** [B, H, W, C] float obs in [0, 1] -> [B, feature] */
  encode(obs: tf.Tensor4D): tf.Tensor2D {
    return tf.tidy(() => {
      if (
        obs.shape[1] !== this.cfg.obsHeight ||
        obs.shape[2] !== this.cfg.obsWidth ||
        obs.shape[3] !== this.cfg.channels
      ) {
        throw new Error(`bad observation shape ${obs.shape}`);
      }
      let x: tf.Tensor4D = obs;
      CONV_STACK.forEach((spec, i) => {
        x = tf
          .conv2d(x, this.vars[`conv${i}/w`] as tf.Tensor4D, spec.stride, "valid")
          .add(this.vars[`conv${i}/b`])
          .relu();
      });
      const flat = x.reshape([x.shape[0], this.flatSize]) as tf.Tensor2D;
      return flat.matMul(this.vars["fc/w"] as tf.Tensor2D).add(this.vars["fc/b"]).relu();
    });
  }

  /** One GRU step: (x [B, F], h [B, F]) -> h' [B, F] */
  gru(x: tf.Tensor2D, h: tf.Tensor2D): tf.Tensor2D {
    return tf.tidy(() => {
      const lin = (w: string, u: string, b: string, hh: tf.Tensor2D) =>
        x.matMul(this.vars[w] as tf.Tensor2D)
          .add(hh.matMul(this.vars[u] as tf.Tensor2D))
          .add(this.vars[b]);
      const z = lin("gru/wz", "gru/uz", "gru/bz", h).sigmoid();
      const r = lin("gru/wr", "gru/ur", "gru/br", h).sigmoid();
      const c = x
        .matMul(this.vars["gru/wc"] as tf.Tensor2D)
        .add(r.mul(h).matMul(this.vars["gru/uc"] as tf.Tensor2D))
        .add(this.vars["gru/bc"])
        .tanh();
      return tf.onesLike(z).sub(z).mul(h).add(z.mul(c)) as tf.Tensor2D;
    });
  }

  /** h [B, F] -> action logits [B, A] and value [B] */
  heads(h: tf.Tensor2D): { logits: tf.Tensor2D; value: tf.Tensor1D } {
    return tf.tidy(() => {
      const logits = h
        .matMul(this.vars["actor/w"] as tf.Tensor2D)
        .add(this.vars["actor/b"]) as tf.Tensor2D;
      const value = h
        .matMul(this.vars["critic/w"] as tf.Tensor2D)
        .add(this.vars["critic/b"])
        .reshape([h.shape[0]]) as tf.Tensor1D;
      return { logits, value };
    });
  }

  /** Full step: obs + previous hidden -> distribution, value, next hidden. */
  forward(
    obs: tf.Tensor4D,
    h: tf.Tensor2D,
  ): { logits: tf.Tensor2D; value: tf.Tensor1D; h: tf.Tensor2D } {
    return tf.tidy(() => {
      const feat = this.encode(obs);
      const h2 = this.gru(feat, h);
      const { logits, value } = this.heads(h2);
      return { logits, value, h: h2 };
    });
  }

  zeroState(batch: number): tf.Tensor2D {
    return tf.zeros([batch, this.cfg.feature]);
  }
}

/** Observation pair bytes -> [H, W, 6] float32 in [0, 1] (early fusion). */
export function fuseObservation(
  target: Uint8Array,
  current: Uint8Array,
  width: number,
  height: number,
): Float32Array {
  const n = width * height;
  if (target.length !== n * 3 || current.length !== n * 3) {
    throw new Error("observation byte length mismatch");
  }
  const out = new Float32Array(n * 6);
  for (let p = 0; p < n; p++) {
    const src = p * 3;
    const dst = p * 6;
    out[dst] = target[src] / 255;
    out[dst + 1] = target[src + 1] / 255;
    out[dst + 2] = target[src + 2] / 255;
    out[dst + 3] = current[src] / 255;
    out[dst + 4] = current[src + 1] / 255;
    out[dst + 5] = current[src + 2] / 255;
  }
  return out;
}
