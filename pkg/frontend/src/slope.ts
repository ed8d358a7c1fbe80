/** Ordinary least squares of log(y) on log(x) for log-log panels. */

export interface SlopeFit {
  slope: number;
  stderr: number;
}

export function fitLogLogSlope(x: number[], y: number[]): SlopeFit {
  if (x.length !== y.length || x.length < 2) {
    throw new Error(`need >= 2 paired points, got ${x.length}/${y.length}`);
  }
  if (x.some((v) => v <= 0) || y.some((v) => v <= 0)) {
    throw new Error("log-log fit requires strictly positive data");
  }
  const lx = x.map(Math.log);
  const ly = y.map(Math.log);
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < lx.length; i++) {
    sxx += (lx[i] - mx) ** 2;
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx === 0) throw new Error("degenerate fit: all x values equal");
  const slope = sxy / sxx;
  let ssr = 0;
  for (let i = 0; i < lx.length; i++) {
    ssr += (ly[i] - my - slope * (lx[i] - mx)) ** 2;
  }
  const dof = lx.length - 2;
  const stderr = dof > 0 ? Math.sqrt(ssr / dof / sxx) : NaN;
  return { slope, stderr };
}
