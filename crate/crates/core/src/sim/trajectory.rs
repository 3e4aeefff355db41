use std::io::{Read, Write};

/// CSV header of an exported trajectory.
pub const CSV_HEADER: [&str; 18] = [
    "t",
    "theta",
    "w",
    "z",
    "z_hat",
    "w_hat",
    "F",
    "F_hat",
    "u",
    "v",
    "e_z",
    "e_w",
    "e_f",
    "ref_raw",
    "ref_filtered",
    "track_err",
    "V",
    "V_dot",
];

/// One record of a simulation. Channels that the active configuration does
/// not define are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub theta: f64,
    pub w: f64,
    pub z: f64,
    pub z_hat: Option<f64>,
    pub w_hat: Option<f64>,
    pub friction: f64,
    pub f_hat: Option<f64>,
    pub u: f64,
    pub v: Option<f64>,
    pub e_z: Option<f64>,
    pub e_w: Option<f64>,
    pub e_f: Option<f64>,
    pub ref_raw: Option<f64>,
    pub ref_filtered: Option<f64>,
    pub track_err: Option<f64>,
    pub lyapunov: Option<f64>,
    pub lyapunov_rate: Option<f64>,
}

impl Sample {
    fn fields(&self) -> [Option<f64>; 18] {
        [
            Some(self.t),
            Some(self.theta),
            Some(self.w),
            Some(self.z),
            self.z_hat,
            self.w_hat,
            Some(self.friction),
            self.f_hat,
            Some(self.u),
            self.v,
            self.e_z,
            self.e_w,
            self.e_f,
            self.ref_raw,
            self.ref_filtered,
            self.track_err,
            self.lyapunov,
            self.lyapunov_rate,
        ]
    }

    fn from_fields(f: [Option<f64>; 18]) -> Option<Self> {
        Some(Self {
            t: f[0]?,
            theta: f[1]?,
            w: f[2]?,
            z: f[3]?,
            z_hat: f[4],
            w_hat: f[5],
            friction: f[6]?,
            f_hat: f[7],
            u: f[8]?,
            v: f[9],
            e_z: f[10],
            e_w: f[11],
            e_f: f[12],
            ref_raw: f[13],
            ref_filtered: f[14],
            track_err: f[15],
            lyapunov: f[16],
            lyapunov_rate: f[17],
        })
    }
}

/// Uniformly sampled simulation record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Extracts one channel; missing values become NaN.
    pub fn channel(&self, f: impl Fn(&Sample) -> Option<f64>) -> Vec<f64> {
        self.samples.iter().map(|s| f(s).unwrap_or(f64::NAN)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CsvError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for s in &self.samples {
            let row = s.fields().map(|v| v.map(|x| format!("{x:.16e}")).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CsvError> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(CsvError::Header(header));
        }
        let mut samples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut fields = [None; 18];
            for (slot, raw) in fields.iter_mut().zip(rec.iter()) {
                if !raw.is_empty() {
                    *slot = Some(raw.parse::<f64>().map_err(|e| CsvError::Row { row, reason: e.to_string() })?);
                }
            }
            let sample = Sample::from_fields(fields)
                .ok_or_else(|| CsvError::Row { row, reason: "missing mandatory column".into() })?;
            samples.push(sample);
        }
        let dt = if samples.len() >= 2 { samples[1].t - samples[0].t } else { 0.0 };
        Ok(Self { dt, samples })
    }
}
