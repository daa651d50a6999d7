use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub episode: u64,
    pub epsilon: f64,
    /// `None` before the first gradient step.
    pub loss: Option<f64>,
    pub mean_q: f64,
    pub reward: f64,
}

/// Training log with CSV columns `step,episode,epsilon,loss,mean_q,reward`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,episode,epsilon,loss,mean_q,reward\n");
        for r in &self.rows {
            let loss = r.loss.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", r.step, r.episode, r.epsilon, loss, r.mean_q, r.reward);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv() {
        let mut log = TrainingLog::default();
        log.push(LogRow {
            step: 1,
            episode: 0,
            epsilon: 0.5,
            loss: None,
            mean_q: 0.0,
            reward: 1.0,
        });
        assert_eq!(log.to_csv(), "step,episode,epsilon,loss,mean_q,reward\n1,0,0.5,,0,1\n");
    }
}
