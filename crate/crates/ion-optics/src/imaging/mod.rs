//! Characterization scans (placeholder).
