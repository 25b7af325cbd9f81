/// Bad input files or arguments.
pub const INPUT_ERROR: u8 = 2;
/// Unreadable or invalid configuration.
pub const CONFIG_ERROR: u8 = 3;
/// Anything else, such as an unwritable output.
pub const RUNTIME_ERROR: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub trait Classify<T> {
    fn input(self, context: impl std::fmt::Display) -> Result<T, Failure>;
    fn config(self, context: impl std::fmt::Display) -> Result<T, Failure>;
    fn runtime(self, context: impl std::fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self, context: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| fail(INPUT_ERROR, e, context))
    }

    fn config(self, context: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| fail(CONFIG_ERROR, e, context))
    }

    fn runtime(self, context: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| fail(RUNTIME_ERROR, e, context))
    }
}

fn fail(code: u8, e: impl Into<anyhow::Error>, context: impl std::fmt::Display) -> Failure {
    Failure { code, error: e.into().context(context.to_string()) }
}

pub fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: INPUT_ERROR, error: anyhow::anyhow!(message.into()) }
}
