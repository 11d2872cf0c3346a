//! System definitions shared by unit tests.

pub const BUCK: &str = r#"
[system]
name = "buck"
n = 2
[dynamics]
g = ["9780", "516.32"]
F = "-0.006*x2"
[coordinates]
names = ["uc", "il"]
map = ["0.98*x1 - 18.6*x2 + 42*u", "0.707*x1 + 219*x2 - 1380*u"]
"#;

pub const VAN_DE_VUSSE: &str = r#"
[system]
name = "van de vusse"
n = 2
[parameters]
k1 = 50
k2 = 100
k3 = 10
CA0 = 10
[dynamics]
g = ["-x1", "k1*CA0 - x2"]
F = "-k1*k2*x1 - k1*x2 - k2*x2 - k3/k1*x2^2 - 2*k3*k2/k1*x1*x2 - k3*k2^2/k1*x1^2"
"#;
