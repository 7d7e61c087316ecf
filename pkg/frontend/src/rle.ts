/**
 * Row-major run-length encoding of a binary bitmap; run lengths alternate
 * starting with the count of zeros. Matches the server's annotation format.
 */

export function rleEncode(bitmap: Uint8Array | number[]): number[] {
  const n = bitmap.length;
  if (n === 0) return [];
  const runs: number[] = [];
  let current = bitmap[0] ? 1 : 0;
  let run = 0;
  if (current === 1) runs.push(0); // first run counts zeros
  for (let i = 0; i < n; i++) {
    const v = bitmap[i] ? 1 : 0;
    if (v === current) {
      run++;
    } else {
      runs.push(run);
      current = v;
      run = 1;
    }
  }
  runs.push(run);
  return runs;
}

export function rleDecode(runs: number[], width: number, height: number): Uint8Array {
  const out = new Uint8Array(width * height);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (!Number.isInteger(run) || run < 0) {
      throw new Error(`invalid run length ${run}`);
    }
    if (value) out.fill(1, pos, pos + run);
    pos += run;
    value = 1 - value;
  }
  if (pos !== width * height) {
    throw new Error(`runs sum to ${pos}, expected ${width * height}`);
  }
  return out;
}
