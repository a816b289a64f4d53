/**
 * Self-describing checkpoints: one JSON file embedding the model and
 * training configs plus base64 weight payloads, restored bit-for-bit.
 */

import * as fs from "fs";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";

import { ModelConfig, PolicyModel } from "./model";
import { TrainingConfig } from "./ppo";

export interface CheckpointMeta {
  updateIndex: number;
  valEps?: number;
  valReward?: number;
}

interface CheckpointFile {
  format: "lookaround-ppo-checkpoint-v1";
  model: ModelConfig;
  training: Partial<TrainingConfig>;
  meta: CheckpointMeta;
  weights: Record<string, { shape: number[]; data: string }>;
}

export function saveCheckpoint(
  file: string,
  model: PolicyModel,
  training: Partial<TrainingConfig>,
  meta: CheckpointMeta,
): void {
  const weights: CheckpointFile["weights"] = {};
  for (const [name, variable] of Object.entries(model.vars)) {
    const data = variable.dataSync() as Float32Array;
    weights[name] = {
      shape: variable.shape.slice(),
      data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
    };
  }
  const payload: CheckpointFile = {
    format: "lookaround-ppo-checkpoint-v1",
    model: model.cfg,
    training,
    meta,
    weights,
  };
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, JSON.stringify(payload));
}

export function loadCheckpoint(file: string): {
  model: PolicyModel;
  training: Partial<TrainingConfig>;
  meta: CheckpointMeta;
} {
  const payload = JSON.parse(fs.readFileSync(file, "utf-8")) as CheckpointFile;
  if (payload.format !== "lookaround-ppo-checkpoint-v1") {
    throw new Error(`unknown checkpoint format: ${payload.format}`);
  }
  const model = new PolicyModel(payload.model);
  for (const [name, { shape, data }] of Object.entries(payload.weights)) {
    const buf = Buffer.from(data, "base64");
    const values = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    model.vars[name].assign(tf.tensor(values, shape));
  }
  return { model, training: payload.training, meta: payload.meta };
}
