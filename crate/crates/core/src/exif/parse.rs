use thiserror::Error;

use super::{
    exposure_mode_text, exposure_program_text, parse_capture_datetime, ByteOrder, ExifRecord,
    NotAnImage, TAG_DATETIME_ORIGINAL, TAG_EXIF_IFD, TAG_EXPOSURE_MODE, TAG_EXPOSURE_PROGRAM,
    TAG_EXPOSURE_TIME, TAG_F_NUMBER, TAG_ISO_SPEED_RATINGS, TAG_MAKE, TAG_MODEL,
    TAG_PHOTOGRAPHIC_SENSITIVITY,
};
use crate::rational::ExifRational;

/// Structural problems found while walking an Exif block.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Malformed {
    #[error("JPEG marker expected at offset {0}")]
    BadMarker(usize),
    #[error("JPEG segment at offset {0} runs past the end of the buffer")]
    TruncatedSegment(usize),
    #[error("invalid TIFF header")]
    BadTiffHeader,
    #[error("IFD at offset {0} is truncated")]
    TruncatedIfd(usize),
    #[error("value of tag {tag:#06x} points beyond the buffer")]
    OffsetOutOfBounds { tag: u16 },
    #[error("tag {tag:#06x} has a zero denominator")]
    ZeroDenominator { tag: u16 },
}

/// Result of [`parse_exif`]: a record plus the reason it was rejected, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed {
    pub record: ExifRecord,
    pub diagnostic: Option<Malformed>,
}

impl Parsed {
    fn ok(record: ExifRecord) -> Self {
        Self {
            record,
            diagnostic: None,
        }
    }

    fn malformed(reason: Malformed) -> Self {
        Self {
            record: ExifRecord::empty(),
            diagnostic: Some(reason),
        }
    }
}

/// Reads capture metadata from a JPEG or bare TIFF byte stream.
///
/// Only a missing SOI/TIFF signature is a hard error. Any structural damage
/// inside the Exif block yields a record with `has_exif == false` and a
/// diagnostic. All reads are bounds checked.
pub fn parse_exif(bytes: &[u8]) -> Result<Parsed, NotAnImage> {
    if bytes.starts_with(&[0xFF, 0xD8]) {
        Ok(match find_jpeg_exif(bytes) {
            Ok(Some(tiff)) => parse_tiff(tiff),
            Ok(None) => Parsed::ok(ExifRecord::empty()),
            Err(m) => Parsed::malformed(m),
        })
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        Ok(parse_tiff(bytes))
    } else {
        Err(NotAnImage)
    }
}

fn find_jpeg_exif(bytes: &[u8]) -> Result<Option<&[u8]>, Malformed> {
    let mut pos = 2;
    loop {
        if pos >= bytes.len() {
            return Ok(None);
        }
        if bytes[pos] != 0xFF {
            return Err(Malformed::BadMarker(pos));
        }
        while pos < bytes.len() && bytes[pos] == 0xFF {
            pos += 1;
        }
        let Some(&marker) = bytes.get(pos) else {
            return Ok(None);
        };
        let segment_start = pos - 1;
        pos += 1;
        match marker {
            0x01 | 0xD0..=0xD8 => continue,
            // SOS or EOI: metadata segments always precede the scan.
            0xD9 | 0xDA => return Ok(None),
            _ => {}
        }
        let len = match bytes.get(pos..pos + 2) {
            Some(b) => u16::from_be_bytes([b[0], b[1]]) as usize,
            None => return Err(Malformed::TruncatedSegment(segment_start)),
        };
        if len < 2 {
            return Err(Malformed::TruncatedSegment(segment_start));
        }
        let data = bytes
            .get(pos + 2..pos + len)
            .ok_or(Malformed::TruncatedSegment(segment_start))?;
        if marker == 0xE1 && data.starts_with(b"Exif\0\0") {
            return Ok(Some(&data[6..]));
        }
        pos += len;
    }
}

struct Tiff<'a> {
    data: &'a [u8],
    order: ByteOrder,
}

#[derive(Clone, Copy)]
struct Entry {
    tag: u16,
    kind: u16,
    count: u32,
    /// Position of the 4-byte value/offset field.
    field: usize,
}

impl<'a> Tiff<'a> {
    fn u16_at(&self, pos: usize) -> Option<u16> {
        let b = self.data.get(pos..pos.checked_add(2)?)?;
        Some(match self.order {
            ByteOrder::Big => u16::from_be_bytes([b[0], b[1]]),
            ByteOrder::Little => u16::from_le_bytes([b[0], b[1]]),
        })
    }

    fn u32_at(&self, pos: usize) -> Option<u32> {
        let b = self.data.get(pos..pos.checked_add(4)?)?;
        let arr = [b[0], b[1], b[2], b[3]];
        Some(match self.order {
            ByteOrder::Big => u32::from_be_bytes(arr),
            ByteOrder::Little => u32::from_le_bytes(arr),
        })
    }

    fn read_ifd(&self, offset: usize) -> Result<Vec<Entry>, Malformed> {
        let count = self.u16_at(offset).ok_or(Malformed::TruncatedIfd(offset))? as usize;
        let end = offset + 2 + count * 12;
        if end > self.data.len() {
            return Err(Malformed::TruncatedIfd(offset));
        }
        Ok((0..count)
            .map(|i| {
                let at = offset + 2 + i * 12;
                Entry {
                    tag: self.u16_at(at).unwrap_or_default(),
                    kind: self.u16_at(at + 2).unwrap_or_default(),
                    count: self.u32_at(at + 4).unwrap_or_default(),
                    field: at + 8,
                }
            })
            .collect())
    }

    /// Raw bytes of an entry's value, or `None` for types this reader ignores.
    fn value(&self, e: &Entry) -> Result<Option<&'a [u8]>, Malformed> {
        let unit: u64 = match e.kind {
            1 | 2 | 6 | 7 => 1,
            3 | 8 => 2,
            4 | 9 | 13 => 4,
            5 | 10 => 8,
            _ => return Ok(None),
        };
        let size = unit * e.count as u64;
        let oob = Malformed::OffsetOutOfBounds { tag: e.tag };
        let start = if size <= 4 {
            e.field
        } else {
            self.u32_at(e.field).ok_or(oob.clone())? as usize
        };
        let end = (start as u64).checked_add(size).ok_or(oob.clone())?;
        if end > self.data.len() as u64 {
            return Err(oob);
        }
        Ok(Some(&self.data[start..end as usize]))
    }

    fn first_uint(&self, e: &Entry) -> Result<Option<u32>, Malformed> {
        if e.count == 0 {
            return Ok(None);
        }
        let Some(v) = self.value(e)? else {
            return Ok(None);
        };
        let sub = Tiff {
            data: v,
            order: self.order,
        };
        Ok(match e.kind {
            3 => sub.u16_at(0).map(u32::from),
            4 | 13 => sub.u32_at(0),
            9 => sub.u32_at(0).filter(|&x| (x as i32) > 0),
            1 | 7 => v.first().map(|&b| b as u32),
            _ => None,
        })
    }

    fn first_rational(&self, e: &Entry) -> Result<Option<ExifRational>, Malformed> {
        if e.count == 0 || !matches!(e.kind, 5 | 10) {
            return Ok(None);
        }
        let Some(v) = self.value(e)? else {
            return Ok(None);
        };
        let sub = Tiff {
            data: v,
            order: self.order,
        };
        let (Some(num), Some(den)) = (sub.u32_at(0), sub.u32_at(4)) else {
            return Ok(None);
        };
        if den == 0 {
            return Err(Malformed::ZeroDenominator { tag: e.tag });
        }
        let (num, den) = if e.kind == 10 {
            let (n, d) = (num as i32 as i64, den as i32 as i64);
            if n.signum() * d.signum() <= 0 {
                return Ok(None);
            }
            (n.unsigned_abs(), d.unsigned_abs())
        } else {
            (num as u64, den as u64)
        };
        if num == 0 {
            return Ok(None);
        }
        Ok(ExifRational::new(num, den).ok())
    }

    fn text(&self, e: &Entry) -> Result<Option<String>, Malformed> {
        if !matches!(e.kind, 2 | 7) {
            return Ok(None);
        }
        let Some(v) = self.value(e)? else {
            return Ok(None);
        };
        let v = v.split(|&b| b == 0).next().unwrap_or_default();
        let s = String::from_utf8_lossy(v).trim().to_string();
        Ok((!s.is_empty()).then_some(s))
    }
}

#[derive(Default)]
struct Collected {
    exposure_time: Option<ExifRational>,
    f_number: Option<ExifRational>,
    iso_ratings: Option<u32>,
    iso_sensitivity: Option<u32>,
    program: Option<String>,
    mode_fallback: Option<String>,
    datetime: Option<chrono::NaiveDateTime>,
    make: Option<String>,
    model: Option<String>,
}

fn fill<T>(slot: &mut Option<T>, value: Option<T>) {
    if slot.is_none() {
        *slot = value;
    }
}

impl Collected {
    fn visit(&mut self, tiff: &Tiff<'_>, e: &Entry) -> Result<(), Malformed> {
        match e.tag {
            TAG_EXPOSURE_TIME => fill(&mut self.exposure_time, tiff.first_rational(e)?),
            TAG_F_NUMBER => fill(&mut self.f_number, tiff.first_rational(e)?),
            TAG_ISO_SPEED_RATINGS => {
                fill(&mut self.iso_ratings, tiff.first_uint(e)?.filter(|&x| x > 0))
            }
            TAG_PHOTOGRAPHIC_SENSITIVITY => {
                fill(&mut self.iso_sensitivity, tiff.first_uint(e)?.filter(|&x| x > 0))
            }
            TAG_EXPOSURE_PROGRAM => {
                let text = match e.kind {
                    2 | 7 => tiff.text(e)?,
                    _ => tiff
                        .first_uint(e)?
                        .and_then(|c| u16::try_from(c).ok())
                        .and_then(exposure_program_text)
                        .map(str::to_string),
                };
                fill(&mut self.program, text);
            }
            TAG_EXPOSURE_MODE => {
                let text = tiff
                    .first_uint(e)?
                    .and_then(|c| u16::try_from(c).ok())
                    .and_then(exposure_mode_text)
                    .map(str::to_string);
                fill(&mut self.mode_fallback, text);
            }
            TAG_DATETIME_ORIGINAL => {
                let dt = tiff.text(e)?.as_deref().and_then(parse_capture_datetime);
                fill(&mut self.datetime, dt);
            }
            TAG_MAKE => fill(&mut self.make, tiff.text(e)?),
            TAG_MODEL => fill(&mut self.model, tiff.text(e)?),
            _ => {}
        }
        Ok(())
    }
}

fn parse_tiff(data: &[u8]) -> Parsed {
    match walk_tiff(data) {
        Ok(record) => Parsed::ok(record),
        Err(m) => Parsed::malformed(m),
    }
}

fn walk_tiff(data: &[u8]) -> Result<ExifRecord, Malformed> {
    let order = match data.get(..4) {
        Some(b"II*\0") => ByteOrder::Little,
        Some(b"MM\0*") => ByteOrder::Big,
        _ => return Err(Malformed::BadTiffHeader),
    };
    let tiff = Tiff { data, order };
    let ifd0_offset = tiff.u32_at(4).ok_or(Malformed::BadTiffHeader)? as usize;
    let ifd0 = tiff.read_ifd(ifd0_offset)?;

    let mut c = Collected::default();
    let mut exif_ifd = None;
    for e in &ifd0 {
        if e.tag == TAG_EXIF_IFD {
            if exif_ifd.is_none() {
                exif_ifd = tiff.first_uint(e)?;
            }
            continue;
        }
        c.visit(&tiff, e)?;
    }
    if let Some(offset) = exif_ifd {
        for e in &tiff.read_ifd(offset as usize)? {
            c.visit(&tiff, e)?;
        }
    }

    Ok(ExifRecord {
        exposure_time: c.exposure_time,
        f_number: c.f_number,
        iso: c.iso_ratings.or(c.iso_sensitivity),
        exposure_program: c.program.or(c.mode_fallback),
        capture_datetime: c.datetime,
        make: c.make,
        model: c.model,
        byte_order: Some(order),
        has_exif: true,
    })
}
