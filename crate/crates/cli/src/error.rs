use tactigrasp_core::dataset::DataError;
use tactigrasp_core::geometry::GeometryError;
use tactigrasp_core::grasping::GraspError;
use tactigrasp_core::scene::SceneError;
use tactigrasp_learn::LearnError;

/// Failure class of a command; decides the exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad arguments or configuration: exit 1.
    Usage(String),
    /// Unreadable, corrupt or unsuitable input data: exit 2.
    Data(String),
    /// The computation itself failed: exit 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }

    /// `error kind=<kind> exit=<code>: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg: String = self.message().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error kind={} exit={}: {msg}", self.kind(), self.exit_code())
    }

    fn with_class(&self, msg: String) -> CliError {
        match self {
            CliError::Usage(_) => CliError::Usage(msg),
            CliError::Data(_) => CliError::Data(msg),
            CliError::Runtime(_) => CliError::Runtime(msg),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::BadDims(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GraspError> for CliError {
    fn from(e: GraspError) -> Self {
        match e {
            GraspError::BadConfig(_) | GraspError::Scene(SceneError::BadConfig(_)) => CliError::Usage(e.to_string()),
            GraspError::Geometry(g) => g.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::BadConfig(_) => CliError::Usage(e.to_string()),
            DataError::BudgetExhausted { .. } => CliError::Runtime(e.to_string()),
            DataError::Grasp(g) => g.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        let msg = e.to_string();
        match e {
            LearnError::Config(_) => CliError::Usage(msg),
            LearnError::DivergenceDetected(_) | LearnError::NonFinite(_) => CliError::Runtime(msg),
            LearnError::Data(d) => CliError::from(d).with_class(msg),
            LearnError::Context { source, .. } => CliError::from(*source).with_class(msg),
            _ => CliError::Data(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_and_lines() {
        let e: CliError = DataError::BadMagic.into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = DataError::BudgetExhausted { collected: 1, target: 2 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = LearnError::DivergenceDetected("nan".into()).context("fold 1").into();
        assert_eq!(e.exit_code(), 3);
        assert!(e.message().starts_with("fold 1"));
        let e: CliError = LearnError::Config("lr".into()).into();
        assert_eq!(e.exit_code(), 1);
        let e = CliError::Data("two\nlines".into());
        assert_eq!(e.line(), "error kind=data exit=2: two lines");
    }
}
