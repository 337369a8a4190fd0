//! Key, signature and message files. Binary by default; hex text is
//! accepted on read and produced on write with `--hex`.

use std::io::Read;
use std::path::{Path, PathBuf};

use spx_batch::sigcore::{PublicKey, SecretKey};
use spx_batch::{Error, ParamSetId};

use crate::Failure;

pub fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

/// Raw bytes if the file already has `expected` bytes, otherwise the
/// decoded hex text if that has the right length, otherwise the raw bytes.
fn decode(raw: Vec<u8>, expected: usize) -> Vec<u8> {
    if raw.len() == expected {
        return raw;
    }
    match std::str::from_utf8(&raw).ok().and_then(|s| hex::decode(s.trim()).ok()) {
        Some(bytes) if bytes.len() == expected => bytes,
        _ => raw,
    }
}

pub fn write(path: &Path, bytes: &[u8], as_hex: bool) -> Result<(), Failure> {
    let body = if as_hex { (hex::encode(bytes) + "\n").into_bytes() } else { bytes.to_vec() };
    std::fs::write(path, body).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn public_key(id: ParamSetId, path: &Path) -> Result<PublicKey, Failure> {
    Ok(PublicKey::from_bytes(id, &decode(read(path)?, 2 * id.params().n))?)
}

pub fn secret_key(id: ParamSetId, path: &Path) -> Result<SecretKey, Failure> {
    Ok(SecretKey::from_bytes(id, &decode(read(path)?, 4 * id.params().n))?)
}

pub fn signature_bytes(id: ParamSetId, path: &Path) -> Result<Vec<u8>, Failure> {
    Ok(decode(read(path)?, id.derived().sig_bytes))
}

/// The message file, or standard input when absent or `-`.
pub fn message(path: Option<&PathBuf>) -> Result<Vec<u8>, Failure> {
    match path {
        Some(p) if p.as_os_str() != "-" => read(p),
        _ => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf).map_err(|e| Failure::internal(format!("stdin: {e}")))?;
            Ok(buf)
        }
    }
}

pub fn hex_arg(what: &'static str, text: &str, expected: usize) -> Result<Vec<u8>, Failure> {
    let bytes = hex::decode(text.trim()).map_err(|e| Failure::usage(format!("{what} is not hex: {e}")))?;
    if bytes.len() != expected {
        return Err(Error::Format { what, expected, actual: bytes.len() }.into());
    }
    Ok(bytes)
}
