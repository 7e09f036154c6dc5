use std::fmt;
use std::str::FromStr;

/// Sparse aggregation primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    SpMM,
    SDDMM,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::SpMM => "spmm",
            Op::SDDMM => "sddmm",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Op {
    type Err = VariantParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spmm" => Ok(Op::SpMM),
            "sddmm" => Ok(Op::SDDMM),
            _ => Err(VariantParseError(format!("unknown op `{s}`"))),
        }
    }
}

/// How rows (and nonzeros of heavy rows) are distributed over workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mapping {
    /// Single-threaded reference loop, the guardrail baseline.
    Baseline,
    /// Chunks of `rows_per_chunk` rows per worker task.
    RowParallel,
    /// Rows at or above `hub_threshold` have their nonzeros split across
    /// workers; the remaining rows run as in `RowParallel`.
    HubSplit,
}

impl Mapping {
    pub fn as_str(self) -> &'static str {
        match self {
            Mapping::Baseline => "baseline",
            Mapping::RowParallel => "rowparallel",
            Mapping::HubSplit => "hubsplit",
        }
    }
}

/// Default split threshold when neither the variant nor the environment sets one.
pub const DEFAULT_HUB_THRESHOLD: usize = 256;

/// One point of the schedule space.
///
/// The baseline variant carries zeroed tuning fields; they are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelVariant {
    pub op: Op,
    pub mapping: Mapping,
    pub f_tile: usize,
    pub rows_per_chunk: usize,
    pub vectorized: bool,
    pub hub_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct VariantParseError(pub String);

impl KernelVariant {
    pub const fn baseline(op: Op) -> Self {
        Self {
            op,
            mapping: Mapping::Baseline,
            f_tile: 0,
            rows_per_chunk: 0,
            vectorized: false,
            hub_threshold: 0,
        }
    }

    pub const fn row_parallel(
        op: Op,
        f_tile: usize,
        rows_per_chunk: usize,
        vectorized: bool,
    ) -> Self {
        Self {
            op,
            mapping: Mapping::RowParallel,
            f_tile,
            rows_per_chunk,
            vectorized,
            hub_threshold: 0,
        }
    }

    pub const fn hub_split(
        op: Op,
        f_tile: usize,
        rows_per_chunk: usize,
        vectorized: bool,
        hub_threshold: usize,
    ) -> Self {
        Self {
            op,
            mapping: Mapping::HubSplit,
            f_tile,
            rows_per_chunk,
            vectorized,
            hub_threshold,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.mapping == Mapping::Baseline
    }

    /// Check the field invariants of tuned mappings.
    pub fn check(&self) -> Result<(), String> {
        if self.is_baseline() {
            return Ok(());
        }
        if self.f_tile == 0 {
            return Err("f_tile must be positive".into());
        }
        if self.rows_per_chunk == 0 {
            return Err("rows_per_chunk must be positive".into());
        }
        if self.mapping == Mapping::HubSplit && self.hub_threshold == 0 {
            return Err("hub_threshold must be positive for hubsplit".into());
        }
        Ok(())
    }

    /// Choice string without the op, e.g. `hubsplit:ft=64:rpc=4:vec=1:hubt=256`.
    pub fn choice_string(&self) -> String {
        self.to_string()
    }

    /// Parse a choice string for the given op.
    pub fn parse_choice(op: Op, s: &str) -> Result<Self, VariantParseError> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mapping = match head.as_str() {
            "baseline" => {
                if let Some(extra) = parts.next() {
                    return Err(VariantParseError(format!(
                        "baseline takes no fields, found `{extra}`"
                    )));
                }
                return Ok(Self::baseline(op));
            }
            "rowparallel" => Mapping::RowParallel,
            "hubsplit" => Mapping::HubSplit,
            _ => return Err(VariantParseError(format!("unknown mapping `{head}`"))),
        };
        let mut v = Self {
            op,
            mapping,
            f_tile: 64,
            rows_per_chunk: 4,
            vectorized: false,
            hub_threshold: if mapping == Mapping::HubSplit {
                DEFAULT_HUB_THRESHOLD
            } else {
                0
            },
        };
        for part in parts {
            let (k, val) = part
                .split_once('=')
                .ok_or_else(|| VariantParseError(format!("expected key=value, found `{part}`")))?;
            let n: usize = val.parse().map_err(|_| {
                VariantParseError(format!("`{k}` expects an integer, found `{val}`"))
            })?;
            match k {
                "ft" => v.f_tile = n,
                "rpc" => v.rows_per_chunk = n,
                "vec" => v.vectorized = n != 0,
                "hubt" if mapping == Mapping::HubSplit => v.hub_threshold = n,
                _ => {
                    return Err(VariantParseError(format!(
                        "unknown field `{k}` for {}",
                        mapping.as_str()
                    )))
                }
            }
        }
        v.check().map_err(VariantParseError)?;
        Ok(v)
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mapping {
            Mapping::Baseline => f.write_str("baseline"),
            Mapping::RowParallel => write!(
                f,
                "rowparallel:ft={}:rpc={}:vec={}",
                self.f_tile, self.rows_per_chunk, self.vectorized as u8
            ),
            Mapping::HubSplit => write!(
                f,
                "hubsplit:ft={}:rpc={}:vec={}:hubt={}",
                self.f_tile, self.rows_per_chunk, self.vectorized as u8, self.hub_threshold
            ),
        }
    }
}

/// Whether 4-wide lanes may be used: F divisible by 4 and every dense
/// operand starting on a 16-byte boundary.
pub fn vec4_eligible(f: usize, alignments: &[usize]) -> bool {
    f.is_multiple_of(4) && alignments.iter().all(|&a| a.is_multiple_of(16))
}
