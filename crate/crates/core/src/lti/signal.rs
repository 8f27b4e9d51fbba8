use nalgebra::DVector;

/// One input channel over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    Constant(f64),
    /// Zero before `time`, `level` from `time` on.
    Step {
        time: f64,
        level: f64,
    },
    /// `amplitude · sin(omega · t + phase)`.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

impl Waveform {
    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            Waveform::Constant(v) => v,
            Waveform::Step { time, level } => {
                if t >= time {
                    level
                } else {
                    0.0
                }
            }
            Waveform::Sinusoid {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Waveform::Sinusoid { .. })
    }

    /// Largest magnitude the waveform reaches.
    pub fn peak(&self) -> f64 {
        match *self {
            Waveform::Constant(v) => v.abs(),
            Waveform::Step { level, .. } => level.abs(),
            Waveform::Sinusoid { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// One waveform per model input, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    channels: Vec<Waveform>,
}

impl InputSignal {
    pub fn new(channels: Vec<Waveform>) -> Self {
        Self { channels }
    }

    pub fn zero(inputs: usize) -> Self {
        Self::new(vec![Waveform::Constant(0.0); inputs])
    }

    pub fn constant(levels: &[f64]) -> Self {
        Self::new(levels.iter().map(|&v| Waveform::Constant(v)).collect())
    }

    pub fn step(time: f64, levels: &[f64]) -> Self {
        Self::new(
            levels
                .iter()
                .map(|&level| Waveform::Step { time, level })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[Waveform] {
        &self.channels
    }

    pub fn value_at(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|w| w.value_at(t)),
        )
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.channels.iter().all(Waveform::is_piecewise_constant)
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().fold(0.0, |m, w| m.max(w.peak()))
    }
}
