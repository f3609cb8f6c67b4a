use thiserror::Error;

use super::{
    exposure_program_code, format_capture_datetime, ByteOrder, ExifRecord, TAG_DATETIME_ORIGINAL,
    TAG_EXIF_IFD, TAG_EXPOSURE_PROGRAM, TAG_EXPOSURE_TIME, TAG_F_NUMBER, TAG_ISO_SPEED_RATINGS,
    TAG_MAKE, TAG_MODEL, TAG_PHOTOGRAPHIC_SENSITIVITY,
};
use crate::rational::ExifRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("record has no Exif data to encode")]
    NoExif,
    #[error("field {0} cannot be encoded in a 32-bit Exif tag")]
    UnencodableField(&'static str),
    #[error("field {0} is not a valid value")]
    InvalidField(&'static str),
}

/// Everything after SOI/APP0 of an 8x8 mid-gray baseline JPEG: quantization
/// and Huffman tables, frame header, one scan and EOI.
const JPEG_BODY: &[u8] = &[
    0xFF, 0xDB, 0x00, 0x43, 0x00, 0x08, 0x06, 0x06, 0x07, 0x06, 0x05, 0x08,
    0x07, 0x07, 0x07, 0x09, 0x09, 0x08, 0x0A, 0x0C, 0x14, 0x0D, 0x0C, 0x0B,
    0x0B, 0x0C, 0x19, 0x12, 0x13, 0x0F, 0x14, 0x1D, 0x1A, 0x1F, 0x1E, 0x1D,
    0x1A, 0x1C, 0x1C, 0x20, 0x24, 0x2E, 0x27, 0x20, 0x22, 0x2C, 0x23, 0x1C,
    0x1C, 0x28, 0x37, 0x29, 0x2C, 0x30, 0x31, 0x34, 0x34, 0x34, 0x1F, 0x27,
    0x39, 0x3D, 0x38, 0x32, 0x3C, 0x2E, 0x33, 0x34, 0x32, 0xFF, 0xC0, 0x00,
    0x0B, 0x08, 0x00, 0x08, 0x00, 0x08, 0x01, 0x01, 0x11, 0x00, 0xFF, 0xC4,
    0x00, 0x1F, 0x00, 0x00, 0x01, 0x05, 0x01, 0x01, 0x01, 0x01, 0x01, 0x01,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01, 0x02, 0x03, 0x04,
    0x05, 0x06, 0x07, 0x08, 0x09, 0x0A, 0x0B, 0xFF, 0xC4, 0x00, 0xB5, 0x10,
    0x00, 0x02, 0x01, 0x03, 0x03, 0x02, 0x04, 0x03, 0x05, 0x05, 0x04, 0x04,
    0x00, 0x00, 0x01, 0x7D, 0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32,
    0x81, 0x91, 0xA1, 0x08, 0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A,
    0x25, 0x26, 0x27, 0x28, 0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55,
    0x56, 0x57, 0x58, 0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85,
    0x86, 0x87, 0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2,
    0xB3, 0xB4, 0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8,
    0xD9, 0xDA, 0xE1, 0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA, 0xFF, 0xDA,
    0x00, 0x08, 0x01, 0x01, 0x00, 0x00, 0x3F, 0x00, 0x2B, 0xFF, 0xD9,
];

enum Value {
    Ascii(String),
    Short(u16),
    Long(u32),
    Rational(u32, u32),
}

impl Value {
    fn kind(&self) -> u16 {
        match self {
            Value::Ascii(_) => 2,
            Value::Short(_) => 3,
            Value::Long(_) => 4,
            Value::Rational(..) => 5,
        }
    }

    fn count(&self) -> u32 {
        match self {
            Value::Ascii(s) => s.len() as u32 + 1,
            _ => 1,
        }
    }

    fn bytes(&self, order: ByteOrder) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Value::Ascii(s) => {
                out.extend_from_slice(s.as_bytes());
                out.push(0);
            }
            Value::Short(v) => put_u16(&mut out, *v, order),
            Value::Long(v) => put_u32(&mut out, *v, order),
            Value::Rational(n, d) => {
                put_u32(&mut out, *n, order);
                put_u32(&mut out, *d, order);
            }
        }
        out
    }
}

fn put_u16(out: &mut Vec<u8>, v: u16, order: ByteOrder) {
    out.extend_from_slice(&match order {
        ByteOrder::Big => v.to_be_bytes(),
        ByteOrder::Little => v.to_le_bytes(),
    });
}

fn put_u32(out: &mut Vec<u8>, v: u32, order: ByteOrder) {
    out.extend_from_slice(&match order {
        ByteOrder::Big => v.to_be_bytes(),
        ByteOrder::Little => v.to_le_bytes(),
    });
}

fn text_value(field: &'static str, text: &str) -> Result<Value, EmitError> {
    if text.is_empty() || text.trim() != text || !text.bytes().all(|b| (0x20..0x7F).contains(&b))
    {
        return Err(EmitError::InvalidField(field));
    }
    Ok(Value::Ascii(text.to_string()))
}

fn rational_value(field: &'static str, r: &ExifRational) -> Result<Value, EmitError> {
    if !r.is_positive() {
        return Err(EmitError::InvalidField(field));
    }
    if !r.fits_u32() {
        return Err(EmitError::UnencodableField(field));
    }
    Ok(Value::Rational(r.numerator() as u32, r.denominator() as u32))
}

/// Writes a minimal JPEG whose APP1 segment encodes exactly the fields present
/// in `record`. Make/Model live in IFD0; the capture settings live in the
/// Exif sub-IFD.
pub fn emit_exif(record: &ExifRecord, order: ByteOrder) -> Result<Vec<u8>, EmitError> {
    let tiff = emit_tiff(record, order)?;
    let app1_len = 2 + 6 + tiff.len();
    let app1_len =
        u16::try_from(app1_len).map_err(|_| EmitError::UnencodableField("app1 segment"))?;
    let mut out = Vec::with_capacity(app1_len as usize + JPEG_BODY.len() + 4);
    out.extend_from_slice(&[0xFF, 0xD8, 0xFF, 0xE1]);
    out.extend_from_slice(&app1_len.to_be_bytes());
    out.extend_from_slice(b"Exif\0\0");
    out.extend_from_slice(&tiff);
    out.extend_from_slice(JPEG_BODY);
    Ok(out)
}

/// The bare TIFF structure carried inside the APP1 segment.
pub fn emit_tiff(record: &ExifRecord, order: ByteOrder) -> Result<Vec<u8>, EmitError> {
    if !record.has_exif {
        return Err(EmitError::NoExif);
    }
    let mut ifd0: Vec<(u16, Value)> = Vec::new();
    if let Some(make) = &record.make {
        ifd0.push((TAG_MAKE, text_value("make", make)?));
    }
    if let Some(model) = &record.model {
        ifd0.push((TAG_MODEL, text_value("model", model)?));
    }

    let mut sub: Vec<(u16, Value)> = Vec::new();
    if let Some(t) = &record.exposure_time {
        sub.push((TAG_EXPOSURE_TIME, rational_value("exposure_time", t)?));
    }
    if let Some(f) = &record.f_number {
        sub.push((TAG_F_NUMBER, rational_value("f_number", f)?));
    }
    if let Some(program) = &record.exposure_program {
        let value = match exposure_program_code(program) {
            Some(code) => Value::Short(code),
            None => text_value("exposure_program", program)?,
        };
        sub.push((TAG_EXPOSURE_PROGRAM, value));
    }
    match record.iso {
        Some(0) => return Err(EmitError::InvalidField("iso")),
        Some(iso) => match u16::try_from(iso) {
            Ok(short) => sub.push((TAG_ISO_SPEED_RATINGS, Value::Short(short))),
            Err(_) => sub.push((TAG_PHOTOGRAPHIC_SENSITIVITY, Value::Long(iso))),
        },
        None => {}
    }
    if let Some(dt) = &record.capture_datetime {
        sub.push((TAG_DATETIME_ORIGINAL, Value::Ascii(format_capture_datetime(dt))));
    }

    let ifd_size = |n: usize| 2 + 12 * n + 4;
    let has_sub = !sub.is_empty();
    let ifd0_len = ifd0.len() + usize::from(has_sub);
    let sub_offset = 8 + ifd_size(ifd0_len);
    let mut data_offset = sub_offset + if has_sub { ifd_size(sub.len()) } else { 0 };
    if has_sub {
        ifd0.push((TAG_EXIF_IFD, Value::Long(sub_offset as u32)));
    }

    let mut head = Vec::new();
    let mut data = Vec::new();
    match order {
        ByteOrder::Little => head.extend_from_slice(b"II*\0"),
        ByteOrder::Big => head.extend_from_slice(b"MM\0*"),
    }
    put_u32(&mut head, 8, order);
    let ifds: &[&Vec<(u16, Value)>] = if has_sub { &[&ifd0, &sub] } else { &[&ifd0] };
    for ifd in ifds {
        put_u16(&mut head, ifd.len() as u16, order);
        for (tag, value) in ifd.iter() {
            let bytes = value.bytes(order);
            put_u16(&mut head, *tag, order);
            put_u16(&mut head, value.kind(), order);
            put_u32(&mut head, value.count(), order);
            if bytes.len() <= 4 {
                let mut inline = bytes;
                inline.resize(4, 0);
                head.extend_from_slice(&inline);
            } else {
                let offset = u32::try_from(data_offset)
                    .map_err(|_| EmitError::UnencodableField("ifd data"))?;
                put_u32(&mut head, offset, order);
                data_offset += bytes.len() + bytes.len() % 2;
                data.extend_from_slice(&bytes);
                if bytes.len() % 2 == 1 {
                    data.push(0);
                }
            }
        }
        put_u32(&mut head, 0, order);
    }
    head.extend_from_slice(&data);
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exif::parse_exif;

    fn record() -> ExifRecord {
        ExifRecord {
            exposure_time: Some(ExifRational::new(1, 4000).unwrap()),
            f_number: Some(ExifRational::integer(22)),
            iso: Some(100),
            has_exif: true,
            ..ExifRecord::default()
        }
    }

    #[test]
    fn round_trips_a_fast_exposure() {
        for order in [ByteOrder::Little, ByteOrder::Big] {
            let bytes = emit_exif(&record(), order).unwrap();
            let parsed = parse_exif(&bytes).unwrap();
            assert_eq!(parsed.diagnostic, None);
            let mut expected = record();
            expected.byte_order = Some(order);
            assert_eq!(parsed.record, expected);
        }
    }

    #[test]
    fn big_endian_header() {
        let bytes = emit_exif(&record(), ByteOrder::Big).unwrap();
        assert_eq!(&bytes[12..14], &[0x4D, 0x4D]);
        let tiff = emit_tiff(&record(), ByteOrder::Big).unwrap();
        assert_eq!(&tiff[..2], b"MM");
    }

    #[test]
    fn iso_only_record_has_one_sub_ifd_entry() {
        let r = ExifRecord {
            iso: Some(200),
            has_exif: true,
            ..ExifRecord::default()
        };
        let tiff = emit_tiff(&r, ByteOrder::Little).unwrap();
        // IFD0 holds only the sub-IFD pointer.
        assert_eq!(u16::from_le_bytes([tiff[8], tiff[9]]), 1);
        assert_eq!(u16::from_le_bytes([tiff[10], tiff[11]]), TAG_EXIF_IFD);
        let sub = u32::from_le_bytes([tiff[18], tiff[19], tiff[20], tiff[21]]) as usize;
        assert_eq!(u16::from_le_bytes([tiff[sub], tiff[sub + 1]]), 1);
        assert_eq!(
            u16::from_le_bytes([tiff[sub + 2], tiff[sub + 3]]),
            TAG_ISO_SPEED_RATINGS
        );
    }

    #[test]
    fn rejects_oversized_rationals() {
        let r = ExifRecord {
            exposure_time: Some(ExifRational::new(1, 1 << 33).unwrap()),
            has_exif: true,
            ..ExifRecord::default()
        };
        assert_eq!(
            emit_exif(&r, ByteOrder::Little),
            Err(EmitError::UnencodableField("exposure_time"))
        );
        assert_eq!(emit_exif(&ExifRecord::empty(), ByteOrder::Little), Err(EmitError::NoExif));
    }

    #[test]
    fn large_iso_goes_to_photographic_sensitivity() {
        let r = ExifRecord {
            iso: Some(204_800),
            has_exif: true,
            ..ExifRecord::default()
        };
        let parsed = parse_exif(&emit_exif(&r, ByteOrder::Big).unwrap()).unwrap();
        assert_eq!(parsed.record.iso, Some(204_800));
    }

    #[test]
    fn text_program_round_trips() {
        let r = ExifRecord {
            exposure_program: Some("Auto exposure".into()),
            has_exif: true,
            ..ExifRecord::default()
        };
        let parsed = parse_exif(&emit_exif(&r, ByteOrder::Little).unwrap()).unwrap();
        assert_eq!(parsed.record.exposure_program.as_deref(), Some("Auto exposure"));
    }
}
