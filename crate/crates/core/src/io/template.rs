use super::IoError;
use crate::types::{packed_len, BitPlane, IrisTemplate, TypeError};

pub const TEMPLATE_MAGIC: [u8; 4] = *b"IRT1";
pub const TEMPLATE_VERSION: u8 = 1;
/// Magic, version byte and two little-endian `u16` dimensions.
pub const TEMPLATE_HEADER_LEN: usize = 9;

/// File size for a `height x width` template.
pub fn template_file_len(height: usize, width: usize) -> usize {
    TEMPLATE_HEADER_LEN + 2 * packed_len(height * width)
}

/// Serializes a template. Dimensions above `u16::MAX` cannot be represented.
pub fn encode_template(t: &IrisTemplate) -> Result<Vec<u8>, IoError> {
    let (h, w) = (t.height(), t.width());
    let (Ok(h16), Ok(w16)) = (u16::try_from(h), u16::try_from(w)) else {
        return Err(TypeError::EmptyDimensions { height: h, width: w }.into());
    };
    let mut out = Vec::with_capacity(template_file_len(h, w));
    out.extend_from_slice(&TEMPLATE_MAGIC);
    out.push(TEMPLATE_VERSION);
    out.extend_from_slice(&h16.to_le_bytes());
    out.extend_from_slice(&w16.to_le_bytes());
    out.extend_from_slice(t.bits().as_bytes());
    out.extend_from_slice(t.mask().as_bytes());
    Ok(out)
}

pub fn decode_template(bytes: &[u8]) -> Result<IrisTemplate, IoError> {
    if bytes.len() < TEMPLATE_HEADER_LEN {
        return Err(IoError::HeaderTruncated { actual: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != TEMPLATE_MAGIC {
        return Err(IoError::BadMagic { found: magic });
    }
    if bytes[4] != TEMPLATE_VERSION {
        return Err(IoError::UnsupportedVersion(bytes[4]));
    }
    let height = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    let width = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
    if height == 0 || width == 0 {
        return Err(TypeError::EmptyDimensions { height, width }.into());
    }
    let expected = template_file_len(height, width);
    if bytes.len() != expected {
        return Err(IoError::Length { expected, actual: bytes.len(), height, width });
    }
    let n = packed_len(height * width);
    let plane = |start: usize| {
        BitPlane::from_packed(height * width, bytes[start..start + n].to_vec()).map_err(|e| match e {
            TypeError::PackedPadding => IoError::Padding { offset: start + n - 1 },
            other => other.into(),
        })
    };
    let bits = plane(TEMPLATE_HEADER_LEN)?;
    let mask = plane(TEMPLATE_HEADER_LEN + n)?;
    Ok(IrisTemplate::from_planes(height, width, bits, mask)?)
}
