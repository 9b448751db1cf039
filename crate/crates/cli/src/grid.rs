use std::fmt;
use std::str::FromStr;

/// Points for a sweep axis, parsed from `a:b:step` or `x,y,z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct GridError(String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid grid: {}", self.0)
    }
}

impl std::error::Error for GridError {}

/// Rounds away the float noise of `a + k·step` so 0.1-step grids print as
/// 0.3 rather than 0.30000000000000004.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl FromStr for Grid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| GridError(format!("{t:?} is not a finite number")))
        };
        let points = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, step] = parts.as_slice() else {
                return Err(GridError(format!("{s:?}: expected a:b:step")));
            };
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step <= 0.0 || b < a {
                return Err(GridError(format!("{s:?}: need step > 0 and b >= a")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            (0..=count).map(|k| tidy(a + k as f64 * step)).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if points.is_empty() {
            return Err(GridError("grid must be non-empty".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GridError(format!("{s:?}: points must be strictly ascending")));
        }
        Ok(Grid(points))
    }
}

impl Grid {
    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn check_probabilities(&self) -> Result<(), GridError> {
        match self.0.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            Some(p) => Err(GridError(format!("probability {p} outside [0,1]"))),
            None => Ok(()),
        }
    }

    pub fn check_positive(&self) -> Result<(), GridError> {
        match self.0.iter().find(|f| **f <= 0.0) {
            Some(f) => Err(GridError(format!("factor {f} must be > 0"))),
            None => Ok(()),
        }
    }
}
