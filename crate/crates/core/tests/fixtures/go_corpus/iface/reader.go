package iface

type R interface {
	Close() error
}

type ReadWriter interface {
	Read(p []byte) (n int, err error)
	Write(p []byte) (n int, err error)
	R
}

type Empty interface{}

func IsCloser(v any) bool {
	_, ok := v.(R)
	return ok
}
