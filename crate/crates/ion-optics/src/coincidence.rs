//! Coincidence sequences (placeholder).
