/**
 * Difficulty curriculum: unlock harder episode sampling at fixed update
 * intervals while keeping the easier levels in the mix (uniformly), so the
 * policy keeps seeing what it already mastered.
 */

export const PHASES: string[][] = [
  ["easy"],
  ["easy", "medium"],
  ["easy", "medium", "hard"],
];

export function difficultyPhase(updateIndex: number, nDifficulty: number): number {
  if (updateIndex < 0) throw new Error("update index must be >= 0");
  return Math.min(2, Math.floor(updateIndex / nDifficulty));
}

/** Sampling mix for an update: uniform over the unlocked difficulties. */
export function difficultyMix(updateIndex: number, nDifficulty: number): Map<string, number> {
  const unlocked = PHASES[difficultyPhase(updateIndex, nDifficulty)];
  return new Map(unlocked.map((d) => [d, 1 / unlocked.length]));
}

export function unlockedDifficulties(updateIndex: number, nDifficulty: number): string[] {
  return [...PHASES[difficultyPhase(updateIndex, nDifficulty)]];
}
