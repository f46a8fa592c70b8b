use std::str::FromStr;

/// `start:stop:count[:linear|:log]`, linear when the scale is omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(format!("grid `{s}` must look like start:stop:count[:linear|:log]"));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|_| format!("bad number `{p}` in grid `{s}`"));
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].parse().map_err(|_| format!("bad count `{}` in grid `{s}`", parts[2]))?;
        let log = match parts.get(3).copied() {
            None | Some("linear") | Some("lin") => false,
            Some("log") => true,
            Some(other) => return Err(format!("unknown grid scale `{other}`, expected linear or log")),
        };
        if count == 0 {
            return Err(format!("grid `{s}` is empty (count must be >= 1)"));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(format!("grid `{s}` needs finite end points"));
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(format!("log grid `{s}` needs positive end points"));
        }
        Ok(GridSpec { start, stop, count, log })
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.count {
                    self.stop
                } else if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect()
    }
}
