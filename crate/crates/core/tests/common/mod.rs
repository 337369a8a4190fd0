#![allow(dead_code)]

use sha2::{Digest, Sha256};
use spx_batch::ParamSetId;

/// Reference-implementation outputs for seed byte `i + 17c`, message byte
/// `3i + c`, message lengths 32, 0 and 200, and opt_rand = pk_seed.
pub struct Kat {
    pub id: ParamSetId,
    pub case: u8,
    pub pk: &'static str,
    pub sig_sha256: &'static str,
}

pub const MSG_LENS: [usize; 3] = [32, 0, 200];

pub const KATS: [Kat; 9] = [
    Kat { id: ParamSetId::S128f, case: 0, pk: "202122232425262728292a2b2c2d2e2f3b56e816847f000386aeec2e2bb9e1b5", sig_sha256: "07ddc758e3da919e63ee6f7a882c4cfe514364b6ef6f64d80b550d9ad991dd66" },
    Kat { id: ParamSetId::S128f, case: 1, pk: "3132333435363738393a3b3c3d3e3f40d8b2adb3e4a2500268eae30a2942cd2e", sig_sha256: "9ea35d4e11107ea9cd982875e1fdc601e6e6269fbadbd6c0efa1a6f099308216" },
    Kat { id: ParamSetId::S128f, case: 2, pk: "42434445464748494a4b4c4d4e4f50516aff1edc0cf9796bbcf8754ff0a464ee", sig_sha256: "d18be0040604c694061ffe37ee35554140f155cf171dcc8d9dfe7409bacdc39d" },
    Kat { id: ParamSetId::S192f, case: 0, pk: "303132333435363738393a3b3c3d3e3f40414243444546475e9993b30299a80e2dde8460cfa1afad73908194f2666a7b", sig_sha256: "85d63f6bcdecbd97ce1671285bc0e30fa501dfe0e401341078cac7348fddd6ba" },
    Kat { id: ParamSetId::S192f, case: 1, pk: "4142434445464748494a4b4c4d4e4f505152535455565758eb5c9db77986695619d73037353b936e38c587a200bc170d", sig_sha256: "2c2ef473f21050922d75646c303a33d424c1d201bc451db8b134ac6170d1d542" },
    Kat { id: ParamSetId::S192f, case: 2, pk: "52535455565758595a5b5c5d5e5f6061626364656667686968dee27358b674e46b39ac0630b0db41a1c4479f5f0fc61f", sig_sha256: "ca10b2fbab31d4189a870ac47a0d8bd9faaf6112cda1c69f4f90b5a15b6c6eb9" },
    Kat { id: ParamSetId::S256f, case: 0, pk: "404142434445464748494a4b4c4d4e4f505152535455565758595a5b5c5d5e5f6312b178d4b40c007f3a8937715e7763ce0e3ec5fe31b04fe5f5ce7e949873cb", sig_sha256: "725fe2ab0ac4091ba9c0903b49461fdad174df6b4713ece7333fa50a63a49e87" },
    Kat { id: ParamSetId::S256f, case: 1, pk: "5152535455565758595a5b5c5d5e5f606162636465666768696a6b6c6d6e6f7081222673913c1f9eb9a5835b750ad44c64e76620e34b7766b71770adc1e74717", sig_sha256: "8d9096bc8739eb5fa45f68a7ffbe09aee7fcdfeab1bdb815af0de3881a44f40a" },
    Kat { id: ParamSetId::S256f, case: 2, pk: "62636465666768696a6b6c6d6e6f707172737475767778797a7b7c7d7e7f8081c2b45311469651cbf758688888883ac838403f7b01e9c550f8521a24af5ea04c", sig_sha256: "2644cfa4d8990b67f9968fbcb2683f84f866545e9332e44de1e1e2015aa36850" },
];

pub const KAT_128F_SIG_HEAD: &str =
    "4f9b127e9402c86dc18f40069d1066164a6049cbbc76ab6572d05e7e042b0b2144dbba3102322e192a0665c4c7887d5d";

impl Kat {
    pub fn seed(&self) -> Vec<u8> {
        (0..3 * self.id.params().n).map(|i| (i as u8).wrapping_add(17 * self.case)).collect()
    }

    pub fn message(&self) -> Vec<u8> {
        (0..MSG_LENS[self.case as usize]).map(|i| ((3 * i) as u8).wrapping_add(self.case)).collect()
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}
