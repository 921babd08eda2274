/// `S ← S − ξ / (Δτ · period) · ln(N_new / N_old)`.
pub fn update_shift(shift: f64, xi: f64, dt: f64, period: usize, n_old: f64, n_new: f64) -> f64 {
    shift - xi / (dt * period as f64) * (n_new / n_old).ln()
}

/// Holds the shift fixed until the population first reaches the threshold,
/// then updates it every `period` iterations.
#[derive(Clone, Debug)]
pub struct ShiftController {
    pub shift: f64,
    xi: f64,
    dt: f64,
    period: usize,
    threshold: f64,
    varying_since: Option<usize>,
    last_population: f64,
}

impl ShiftController {
    pub fn new(initial_shift: f64, xi: f64, dt: f64, period: usize, threshold: f64, population: f64) -> Self {
        Self {
            shift: initial_shift,
            xi,
            dt,
            period: period.max(1),
            threshold,
            varying_since: None,
            last_population: population,
        }
    }

    pub fn varying_since(&self) -> Option<usize> {
        self.varying_since
    }

    /// Feeds the population after iteration `iter` has completed.
    pub fn observe(&mut self, iter: usize, population: f64) {
        match self.varying_since {
            None => {
                if population >= self.threshold {
                    self.varying_since = Some(iter);
                    self.last_population = population;
                }
            }
            Some(start) => {
                if (iter - start) % self.period == 0 {
                    self.shift = update_shift(self.shift, self.xi, self.dt, self.period, self.last_population, population);
                    self.last_population = population;
                }
            }
        }
    }
}

/// Detects the annihilation plateau of a signed run: during the constant-shift
/// phase the logarithmic growth rate over a sliding window falls below a tenth
/// of the rate seen in the first window.
#[derive(Clone, Debug)]
pub struct PlateauDetector {
    window: usize,
    log_pop: Vec<f64>,
    initial_rate: Option<f64>,
    pub found: Option<(usize, f64)>,
}

impl PlateauDetector {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(2), log_pop: Vec::new(), initial_rate: None, found: None }
    }

    pub fn observe(&mut self, iter: usize, population: f64) {
        if self.found.is_some() || population <= 0.0 {
            return;
        }
        self.log_pop.push(population.ln());
        let n = self.log_pop.len();
        if n <= self.window {
            return;
        }
        let rate = (self.log_pop[n - 1] - self.log_pop[n - 1 - self.window]) / self.window as f64;
        match self.initial_rate {
            None => self.initial_rate = Some(rate),
            Some(r0) if r0 > 0.0 && rate < 0.1 * r0 => self.found = Some((iter, population)),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        assert_eq!(update_shift(-3.0, 0.05, 0.01, 1, 1e4, 1e4), -3.0);
        let s = update_shift(0.0, 1.0, 1.0, 1, 1.0, std::f64::consts::E);
        assert!((s + 1.0).abs() < 1e-15);
        let s = update_shift(0.0, 0.1, 0.01, 5, 100.0, 50.0);
        assert!((s - 0.1 / 0.05 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn controller_waits_for_threshold() {
        let mut c = ShiftController::new(0.0, 0.1, 0.01, 2, 100.0, 10.0);
        c.observe(0, 50.0);
        assert_eq!((c.shift, c.varying_since()), (0.0, None));
        c.observe(1, 120.0);
        assert_eq!(c.varying_since(), Some(1));
        c.observe(2, 200.0);
        assert_eq!(c.shift, 0.0);
        c.observe(3, 240.0);
        assert!((c.shift + 0.1 / 0.02 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn plateau_on_stalled_growth() {
        let mut p = PlateauDetector::new(10);
        for i in 0..100 {
            let pop = if i < 50 { (0.1 * i as f64).exp() } else { 5f64.exp() };
            p.observe(i, pop);
        }
        let (it, _) = p.found.unwrap();
        assert!((50..62).contains(&it));
        let mut q = PlateauDetector::new(10);
        for i in 0..100 {
            q.observe(i, (0.1 * i as f64).exp());
        }
        assert!(q.found.is_none());
    }
}
