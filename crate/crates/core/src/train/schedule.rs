/// Linear warmup from 0 to `base` over `warmup` steps, then cosine decay to
/// 0 at step `total`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub base: f64,
    pub warmup: usize,
    pub total: usize,
}

impl Schedule {
    pub fn new(base: f64, warmup_epochs: usize, epochs: usize, steps_per_epoch: usize) -> Self {
        Self {
            base,
            warmup: warmup_epochs * steps_per_epoch,
            total: epochs * steps_per_epoch,
        }
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup {
            return self.base * step as f64 / self.warmup as f64;
        }
        if self.total <= self.warmup {
            return self.base;
        }
        let progress = ((step - self.warmup) as f64 / (self.total - self.warmup) as f64).min(1.0);
        0.5 * self.base * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn warmup_start_end_and_cosine_midpoint() {
        let s = Schedule::new(0.01, 5, 25, 4);
        assert_eq!(s.lr_at(0), 0.0);
        assert_eq!(s.lr_at(20), 0.01);
        assert!((s.lr_at(60) - 0.005).abs() < 1e-9);
        assert!(s.lr_at(100).abs() < 1e-18);
    }

    #[test]
    fn no_warmup_starts_at_base() {
        let s = Schedule::new(2.0, 0, 3, 1);
        assert_eq!(s.lr_at(0), 2.0);
    }

    proptest! {
        #[test]
        fn non_negative_bounded_and_continuous(base in 1e-6f64..1.0, warm in 0usize..10, extra in 1usize..50) {
            let s = Schedule { base, warmup: warm, total: warm + extra };
            for step in 0..=s.total {
                let lr = s.lr_at(step);
                prop_assert!(lr >= 0.0 && lr <= base * (1.0 + 1e-12));
            }
            // the step after the junction moves by at most one cosine increment
            let jump = (s.lr_at(warm) - s.lr_at(warm + 1)).abs();
            let bound = base * (1.0 - (std::f64::consts::PI / extra as f64).cos()) / 2.0 + 1e-12;
            prop_assert!(jump <= bound);
            if warm > 0 {
                prop_assert!((s.lr_at(warm) - base).abs() < 1e-15);
            }
        }
    }
}
