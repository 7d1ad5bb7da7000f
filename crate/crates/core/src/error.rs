use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid image dimensions {width}x{height}x{channels}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("pixel buffer has {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("pixel value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("image is already grayscale")]
    AlreadyGrayscale,
    #[error("operation requires a 3-channel RGB image")]
    NotRgb,
    #[error("operation requires a single-channel image")]
    NotGrayscale,
    #[error("rectangle {x},{y} {w}x{h} does not fit a {width}x{height} image")]
    RectOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("gaussian sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("image {width}x{height} is smaller than the 3x3 minimum")]
    ImageTooSmall { width: usize, height: usize },
    #[error("low threshold {low} must be below high threshold {high}")]
    ThresholdOrder { low: f64, high: f64 },
    #[error("edge map has already been finalized by hysteresis")]
    AlreadyFinalized,
    #[error("target size {width}x{height} is degenerate")]
    DegenerateTarget { width: usize, height: usize },
    #[error("crop is larger than the image")]
    CropLargerThanImage,
    #[error("transformation matrix is singular")]
    SingularMatrix,
    #[error("factor must be finite and non-negative, got {0}")]
    NegativeFactor(f64),
    #[error("hue shift {0} outside [-0.5, 0.5]")]
    ShiftOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("max pooling needs even spatial dimensions, got {height}x{width}")]
    OddSpatialDims { height: usize, width: usize },
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
}
