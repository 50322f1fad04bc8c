const kernel = function (task, host) {
  const counts = task.counts || [];
  for (let i = task.done_pixels || 0; i < task.pixel_count; i++) {
    const index = task.first_pixel + i;
    const cr = task.x0 + (index % task.width_px) * task.pixel_step;
    const ci = task.y0 + Math.floor(index / task.width_px) * task.pixel_step;
    let zr = 0.0;
    let zi = 0.0;
    let n = 1;
    let count = task.max_iter;
    for (; n <= task.max_iter; n++) {
      const r2 = zr * zr - zi * zi + cr;
      zi = 2.0 * zr * zi + ci;
      zr = r2;
      if (zr * zr + zi * zi > 4.0) {
        count = n;
        break;
      }
    }
    counts.push(count);
  }
  task.counts = counts;
  task.done_pixels = task.pixel_count;
};
