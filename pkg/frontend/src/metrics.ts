/** Evaluation metrics over completed episodes (client-side mirror). */

export interface Outcome {
  errDeg: number;
  stopCalled: boolean;
  pathLength: number;
  oraclePathLength: number;
  totalReward: number;
}

export interface MetricsRow {
  eps: number;
  omegaStop: number;
  omegaPerf: number;
  spl: number;
  meanReward: number;
  n: number;
}

export function wrappedL1(
  a: [number, number],
  b: [number, number],
): number {
  const dp = Math.abs(a[0] - b[0]);
  const dy = Math.abs(a[1] - b[1]);
  return dp + Math.min(dy, 360 - dy);
}

export function aggregate(outcomes: Outcome[]): MetricsRow {
  if (!outcomes.length) throw new Error("no outcomes");
  const n = outcomes.length;
  const stopped = outcomes.filter((o) => o.stopCalled);
  const perfect = stopped.filter((o) => o.errDeg === 0);
  let spl = 0;
  for (const o of outcomes) {
    if (o.errDeg !== 0) continue;
    spl +=
      o.oraclePathLength === 0
        ? 1
        : o.oraclePathLength / Math.max(o.pathLength, o.oraclePathLength);
  }
  return {
    eps: outcomes.reduce((a, o) => a + o.errDeg, 0) / n,
    omegaStop: (100 * stopped.length) / n,
    omegaPerf: stopped.length ? (100 * perfect.length) / stopped.length : 0,
    spl: (100 * spl) / n,
    meanReward: outcomes.reduce((a, o) => a + o.totalReward, 0) / n,
    n,
  };
}
