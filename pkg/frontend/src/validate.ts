/**
 * Greedy validation over a fixed episode file served by a file-source
 * server, with a step trace for offline metric recomputation.
 */

import * as fs from "fs";

import * as tf from "@tensorflow/tfjs";

import { PolicyModel, fuseObservation } from "./model";
import { MetricsRow, Outcome, aggregate, wrappedL1 } from "./metrics";
import { ACTIONS, EnvClient } from "./protocol";

export async function validate(
  model: PolicyModel,
  client: EnvClient,
  episodeCount: number,
  maxSteps: number,
  tracePath?: string,
): Promise<MetricsRow> {
  const outcomes: Outcome[] = [];
  const trace: string[] = [];
  for (let ep = 0; ep < episodeCount; ep++) {
    let reply = await client.reset(0);
    if (!reply.ok) throw new Error(`reset failed: ${reply.error}`);
    const initial = reply.info!.rotation!;
    const target = reply.info!.target!;
    const oracle = wrappedL1(initial, target);
    trace.push(JSON.stringify({
      type: "episode", episode: ep, init: initial, target,
      pano: reply.info!.pano, difficulty: reply.info!.difficulty,
    }));
    let h = model.zeroState(1);
    let totalReward = 0;
    let pathLength = 0;
    let steps = 0;
    while (!reply.done && steps < maxSteps) {
      const obs = reply.obs!;
      const fused = fuseObservation(obs.target, obs.current, obs.width, obs.height);
      const x = tf.tensor4d(fused, [1, obs.height, obs.width, 6]);
      const out = model.forward(x, h);
      const probs = (await out.logits.data()) as Float32Array;
      [x, out.logits, out.value, h].forEach((t) => t.dispose());
      h = out.h;
      let best = 0;
      for (let i = 1; i < ACTIONS.length; i++) if (probs[i] > probs[best]) best = i;
      reply = await client.step(0, ACTIONS[best]);
      if (!reply.ok) throw new Error(`step failed: ${reply.error}`);
      totalReward += reply.reward!;
      if (ACTIONS[best] !== "stop") pathLength += 1;
      steps += 1;
      const [pitch, yaw] = reply.info!.rotation!;
      trace.push(JSON.stringify({
        type: "step", episode: ep, t: reply.info!.step, action: ACTIONS[best],
        reward: reply.reward, pitch, yaw,
      }));
    }
    h.dispose();
    const final = reply.info!.rotation!;
    const outcome: Outcome = {
      errDeg: wrappedL1(final, target),
      stopCalled: reply.info!.stop_called,
      pathLength,
      oraclePathLength: oracle,
      totalReward,
    };
    outcomes.push(outcome);
    trace.push(JSON.stringify({
      type: "end", episode: ep, final, err: outcome.errDeg,
      stop_called: outcome.stopCalled, path_length: pathLength, reward: totalReward,
    }));
  }
  if (tracePath) fs.writeFileSync(tracePath, trace.join("\n") + "\n");
  return aggregate(outcomes);
}
