//! Holds the acceptance test target only.
