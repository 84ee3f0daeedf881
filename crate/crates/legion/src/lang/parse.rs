use super::ast::*;
use super::lex::{Tok, Token};
use super::{LangError, Span};
use crate::ir::Ty;

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

pub fn parse_tokens(toks: &[Token]) -> Result<Ast, LangError> {
    let mut p = Parser { toks, pos: 0 };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.function()?);
    }
    if functions.is_empty() {
        return Err(LangError::Program("no functions defined".into()));
    }
    Ok(Ast { functions })
}

fn parse_ty(name: &str) -> Ty {
    match name {
        "u8" => Ty { width: 8, signed: false },
        "u16" => Ty { width: 16, signed: false },
        "u32" => Ty { width: 32, signed: false },
        "i8" => Ty { width: 8, signed: true },
        "i16" => Ty { width: 16, signed: true },
        "i32" => Ty { width: 32, signed: true },
        _ => unreachable!("lexer only emits known type names"),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> LangError {
        LangError::SyntaxError {
            span: self.span(),
            expected: expected.into(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Span, LangError> {
        if self.peek() == &tok {
            let span = self.span();
            self.bump();
            Ok(span)
        } else {
            Err(self.err(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), LangError> {
        if let Tok::Ident(name) = self.peek() {
            let name = name.clone();
            let span = self.span();
            self.bump();
            Ok((name, span))
        } else {
            Err(self.err(what))
        }
    }

    fn ty(&mut self) -> Result<Ty, LangError> {
        if let Tok::Type(name) = self.peek() {
            let ty = parse_ty(name);
            self.bump();
            Ok(ty)
        } else {
            Err(self.err("a type (u8, u16, u32, i8, i16, i32)"))
        }
    }

    fn function(&mut self) -> Result<FunctionDecl, LangError> {
        let span = self.expect(Tok::KwFn, "`fn`")?;
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (pname, _) = self.ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                params.push((pname, ty));
                if self.peek() == &Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let ret = if self.peek() == &Tok::Arrow {
            self.bump();
            Some(self.ty()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(FunctionDecl { name, params, ret, body, span })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                return Err(self.err("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then_body = self.block()?;
                let else_body = if self.peek() == &Tok::KwElse {
                    self.bump();
                    if self.peek() == &Tok::KwIf {
                        vec![self.stmt()?]
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_body, else_body, span })
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body, span })
            }
            Tok::KwReturn => {
                self.bump();
                let expr = if self.peek() == &Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Return { expr, span })
            }
            Tok::KwAssert => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Assert { cond, span })
            }
            Tok::KwAbort => {
                self.bump();
                // Both `abort;` and `abort();` are accepted.
                if self.peek() == &Tok::LParen {
                    self.bump();
                    self.expect(Tok::RParen, "`)`")?;
                }
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Abort { span })
            }
            Tok::Ident(name) => {
                // Either `name = expr;` or an expression statement (a call).
                if self.toks[self.pos + 1].tok == Tok::Assign {
                    self.bump();
                    self.bump();
                    let expr = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Stmt::Assign { name, expr, span })
                } else {
                    let expr = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Stmt::ExprStmt { expr, span })
                }
            }
            _ => {
                let expr = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::ExprStmt { expr, span })
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        self.or_expr()
    }

    fn bin_chain(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, LangError>,
        map: fn(&Tok) -> Option<AstBinOp>,
    ) -> Result<Expr, LangError> {
        let mut lhs = next(self)?;
        while let Some(op) = map(self.peek()) {
            let span = self.span();
            self.bump();
            let rhs = next(self)?;
            lhs = Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::and_expr, |t| match t {
            Tok::OrOr => Some(AstBinOp::OrOr),
            _ => None,
        })
    }

    fn and_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::eq_expr, |t| match t {
            Tok::AndAnd => Some(AstBinOp::AndAnd),
            _ => None,
        })
    }

    fn eq_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::rel_expr, |t| match t {
            Tok::EqEq => Some(AstBinOp::Eq),
            Tok::NotEq => Some(AstBinOp::Ne),
            _ => None,
        })
    }

    fn rel_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::bitor_expr, |t| match t {
            Tok::Lt => Some(AstBinOp::Lt),
            Tok::Le => Some(AstBinOp::Le),
            Tok::Gt => Some(AstBinOp::Gt),
            Tok::Ge => Some(AstBinOp::Ge),
            _ => None,
        })
    }

    fn bitor_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::bitxor_expr, |t| match t {
            Tok::Pipe => Some(AstBinOp::BitOr),
            _ => None,
        })
    }

    fn bitxor_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::bitand_expr, |t| match t {
            Tok::Caret => Some(AstBinOp::BitXor),
            _ => None,
        })
    }

    fn bitand_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::shift_expr, |t| match t {
            Tok::Amp => Some(AstBinOp::BitAnd),
            _ => None,
        })
    }

    fn shift_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::add_expr, |t| match t {
            Tok::Shl => Some(AstBinOp::Shl),
            Tok::Shr => Some(AstBinOp::Shr),
            _ => None,
        })
    }

    fn add_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::mul_expr, |t| match t {
            Tok::Plus => Some(AstBinOp::Add),
            Tok::Minus => Some(AstBinOp::Sub),
            _ => None,
        })
    }

    fn mul_expr(&mut self) -> Result<Expr, LangError> {
        self.bin_chain(Self::unary_expr, |t| match t {
            Tok::Star => Some(AstBinOp::Mul),
            Tok::Slash => Some(AstBinOp::Div),
            Tok::Percent => Some(AstBinOp::Rem),
            _ => None,
        })
    }

    fn unary_expr(&mut self) -> Result<Expr, LangError> {
        let span = self.span();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let arg = self.unary_expr()?;
                Ok(Expr::Un { op: AstUnOp::Neg, arg: Box::new(arg), span })
            }
            Tok::Tilde => {
                self.bump();
                let arg = self.unary_expr()?;
                Ok(Expr::Un { op: AstUnOp::BitNot, arg: Box::new(arg), span })
            }
            Tok::Bang => {
                self.bump();
                let arg = self.unary_expr()?;
                Ok(Expr::Un { op: AstUnOp::Not, arg: Box::new(arg), span })
            }
            _ => self.cast_expr(),
        }
    }

    fn cast_expr(&mut self) -> Result<Expr, LangError> {
        let mut e = self.primary()?;
        while self.peek() == &Tok::KwAs {
            let span = self.span();
            self.bump();
            let ty = self.ty()?;
            e = Expr::Cast { arg: Box::new(e), ty, span };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(value) => {
                self.bump();
                Ok(Expr::Literal { value, span })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::KwInput => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let width = if let Tok::Number(n) = self.peek() {
                    let n = *n;
                    if !matches!(n, 8 | 16 | 32) {
                        return Err(LangError::TypeMismatch {
                            span: self.span(),
                            msg: format!("input width must be 8, 16 or 32, got {n}"),
                        });
                    }
                    self.bump();
                    n as u8
                } else {
                    return Err(self.err("an input width (8, 16 or 32)"));
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Input { width, span })
            }
            Tok::KwChooseConcrete => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::ChooseConcrete { arg: Box::new(arg), span })
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek() == &Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek() != &Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if self.peek() == &Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Call { name, args, span })
                } else {
                    Ok(Expr::Var { name, span })
                }
            }
            _ => Err(self.err("an expression")),
        }
    }
}
