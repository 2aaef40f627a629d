use treenc::model::ModelError;
use treenc::training::TrainError;

pub const USAGE: u8 = 2;
pub const NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Self {
            code: USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let error = e.into();
        let numeric = error.chain().any(|c| {
            c.downcast_ref::<TrainError>()
                .is_some_and(TrainError::is_numeric)
                || matches!(
                    c.downcast_ref::<ModelError>(),
                    Some(ModelError::NonFinite(_))
                )
        });
        Self {
            code: if numeric { NUMERIC } else { USAGE },
            error,
        }
    }
}
