//! Minimal polyline plots rendered straight to SVG text.

use std::fmt::Write as _;

use crate::engine::SimulationTrace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
/// Points kept per series; longer series are strided.
const MAX_POINTS: usize = 1500;

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str, log_y: bool) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y,
            series: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) {
        self.series.push((name.into(), points));
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.max(1e-300).log10()
        } else {
            y
        }
    }

    pub fn render(&self) -> String {
        let pts = self.series.iter().flat_map(|(_, s)| s.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
                continue;
            }
            let y = self.ty(y);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if self.log_y {
            y0 = y0.floor();
            y1 = y1.ceil();
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 <= 0.0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (self.ty(y) - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=5 {
            let x = x0 + (x1 - x0) * k as f64 / 5.0;
            let px = sx(x);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{t}" text-anchor="middle">{}</text>"#,
                tick(x),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                t = TOP + ph + 18.0,
            );
        }
        let y_ticks: Vec<f64> = if self.log_y {
            let step = ((y1 - y0) / 8.0).ceil().max(1.0);
            let mut v = Vec::new();
            let mut e = y0;
            while e <= y1 + 1e-9 {
                v.push(e);
                e += step;
            }
            v
        } else {
            (0..=5).map(|k| y0 + (y1 - y0) * k as f64 / 5.0).collect()
        };
        for ty in y_ticks {
            let py = TOP + (1.0 - (ty - y0) / (y1 - y0)) * ph;
            let label = if self.log_y { format!("1e{}", ty as i64) } else { tick(ty) };
            let _ = writeln!(
                out,
                r#"<line x1="{l2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{lt}" y="{py:.2}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
                l2 = LEFT - 5.0,
                lt = LEFT - 8.0,
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
            escape(&self.y_label),
            y = TOP + ph / 2.0
        );
        let n = self.series.len().max(1);
        for (i, (name, s)) in self.series.iter().enumerate() {
            let stride = s.len().div_ceil(MAX_POINTS).max(1);
            let mut d = String::new();
            let mut pen_up = true;
            for (k, &(x, y)) in s.iter().enumerate() {
                if k % stride != 0 && k + 1 != s.len() {
                    continue;
                }
                if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
                    pen_up = true;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, sx(x), sy(y));
                pen_up = false;
            }
            let hue = 360.0 * i as f64 / n as f64;
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="hsl({hue:.0},70%,40%)" stroke-width="1"><title>{}</title></path>"#,
                d.trim_end(),
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-agent error norms against time on a log scale.
pub fn error_plot(trace: &SimulationTrace) -> String {
    let mut plot = LinePlot::new("Centroid tracking error", "t", "|e_p|", true);
    for p in 0..trace.agent_count {
        plot.push(
            format!("agent {p}"),
            trace.samples.iter().map(|m| (m.t, m.error_norms[p])).collect(),
        );
    }
    plot.render()
}

pub fn cost_plot(trace: &SimulationTrace) -> String {
    let mut plot = LinePlot::new("Locational cost", "t", "V", false);
    plot.push("V", trace.samples.iter().map(|m| (m.t, m.cost)).collect());
    plot.render()
}

/// Timer values over the first few dozen reset periods, where individual
/// sawteeth are still visible.
pub fn timer_plot(trace: &SimulationTrace) -> String {
    let hi = trace.timer_bounds.iter().map(|b| b.1).fold(0.0, f64::max);
    let t_end = (40.0 * hi).min(trace.t_final);
    let mut plot = LinePlot::new("Timers", "t", "tau_p", false);
    for p in 0..trace.agent_count {
        let mut pts = Vec::new();
        // Each event restarts the sawtooth; draw the vertical reset explicitly.
        let mut last_t = 0.0;
        let mut last_tau = None::<f64>;
        for e in trace.events.iter().filter(|e| e.agent == p && e.t <= t_end) {
            if let Some(tau) = last_tau {
                pts.push((e.t, (tau - (e.t - last_t)).max(0.0)));
            }
            pts.push((e.t, e.tau_new));
            last_t = e.t;
            last_tau = Some(e.tau_new);
        }
        if let Some(tau) = last_tau {
            let t = t_end.min(last_t + tau);
            pts.push((t, tau - (t - last_t)));
        }
        plot.push(format!("agent {p}"), pts);
    }
    plot.render()
}

/// Cumulative event counts per agent against time for each labelled run.
pub fn count_plot(traces: &[(String, &SimulationTrace)]) -> String {
    let mut plot = LinePlot::new("Cumulative cell computations", "t", "count", false);
    for (label, trace) in traces {
        let grid = MAX_POINTS.min(1000);
        for p in 0..trace.agent_count {
            let times = trace.event_times(p);
            let mut k = 0;
            let pts = (0..=grid)
                .map(|i| {
                    let t = trace.t_final * i as f64 / grid as f64;
                    while k < times.len() && times[k] <= t {
                        k += 1;
                    }
                    (t, k as f64)
                })
                .collect();
            plot.push(format!("{label} agent {p}"), pts);
        }
    }
    plot.render()
}
