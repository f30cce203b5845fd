//! Flat variable vector: the three design scalars, then one block per step.

/// Per-step fields in block order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Sigma,
    FmF,
    FrPos,
    FrNeg,
    FbrkF,
    FbrkR,
    FtrF,
    PacPos,
    PacNeg,
    PbPos,
    PbNeg,
    Eb,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::Sigma,
        Field::FmF,
        Field::FrPos,
        Field::FrNeg,
        Field::FbrkF,
        Field::FbrkR,
        Field::FtrF,
        Field::PacPos,
        Field::PacNeg,
        Field::PbPos,
        Field::PbNeg,
        Field::Eb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Sigma => "sigma",
            Field::FmF => "F_m_f",
            Field::FrPos => "F_m_r+",
            Field::FrNeg => "F_m_r-",
            Field::FbrkF => "F_brk_f",
            Field::FbrkR => "F_brk_r",
            Field::FtrF => "F_tr_f",
            Field::PacPos => "P_ac+",
            Field::PacNeg => "P_ac-",
            Field::PbPos => "P_b+",
            Field::PbNeg => "P_b-",
            Field::Eb => "E_b",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scalar {
    Gamma,
    Sm,
    Sb,
}

impl Scalar {
    pub const ALL: [Scalar; 3] = [Scalar::Gamma, Scalar::Sm, Scalar::Sb];

    pub fn name(self) -> &'static str {
        match self {
            Scalar::Gamma => "gamma",
            Scalar::Sm => "S_m",
            Scalar::Sb => "S_b",
        }
    }
}

/// Fields per step.
pub const BLOCK: usize = Field::ALL.len();
pub const SCALARS: usize = Scalar::ALL.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub steps: usize,
}

impl Layout {
    pub fn new(steps: usize) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        SCALARS + self.steps * BLOCK
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scalar(&self, s: Scalar) -> usize {
        s as usize
    }

    pub fn field(&self, step: usize, f: Field) -> usize {
        debug_assert!(step < self.steps);
        SCALARS + step * BLOCK + f as usize
    }

    /// Inverse of [`Layout::field`] and [`Layout::scalar`].
    pub fn locate(&self, index: usize) -> Slot {
        if index < SCALARS {
            Slot::Scalar(Scalar::ALL[index])
        } else {
            let i = index - SCALARS;
            Slot::Field(i / BLOCK, Field::ALL[i % BLOCK])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Scalar(Scalar),
    Field(usize, Field),
}
