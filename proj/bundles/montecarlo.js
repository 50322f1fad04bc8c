// SplitMix64 with per-chunk reseeding; must match the native kernel bit for bit.
const MASK = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const CHUNK = 1000000;

function mix(z) {
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK;
  return z ^ (z >> 31n);
}

function chunkSeed(seed, index) {
  return mix((BigInt(seed) ^ ((0xd1b54a32d192ed03n * BigInt(index + 1)) & MASK)) & MASK);
}

const kernel = function (task, host) {
  let i = task.done_iterations || 0;
  let hits = task.hits || 0;
  while (i < task.iterations) {
    const chunk = Math.floor(i / CHUNK);
    const end = Math.min(task.iterations, (chunk + 1) * CHUNK);
    let state = (chunkSeed(task.seed, chunk) + GAMMA * BigInt(2 * (i - chunk * CHUNK))) & MASK;
    for (; i < end; i++) {
      state = (state + GAMMA) & MASK;
      const x = Number(mix(state) >> 11n) * 2 ** -53;
      state = (state + GAMMA) & MASK;
      const y = Number(mix(state) >> 11n) * 2 ** -53;
      if (x * x + y * y <= 1.0) hits++;
    }
  }
  task.hits = hits;
  task.done_iterations = i;
};
