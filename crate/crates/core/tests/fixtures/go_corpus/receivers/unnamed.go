package receivers

type Buffer struct{ b []byte }

type T int

func (Buffer) Len() int { return 0 }

func (*Buffer) Reset() {}

func (_ T) Value() int { return 0 }

func (t T) Double() T { return t * 2 }

func (b *Buffer) Bytes() []byte {
	return b.b
}

func ( b  *  Buffer ) Spaced() {}
